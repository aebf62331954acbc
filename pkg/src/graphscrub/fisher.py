"""Empirical Fisher diagonals over node subsets.

values[j] = (1/|S|) sum_{i in S} g_{i,j}^2, where g_i is the per-sample
gradient of -log Z[i, y_i] at the current parameters. The mean-of-squares
form makes the weighted decomposition over any partition of a subset exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import gcn
from .backend import get_w0_square_sum
from .errors import InputError

__all__ = ["FisherDiag", "fisher_diag", "importance_ratios", "DEFAULT_EPS"]

DEFAULT_EPS = 1e-12


@dataclass(frozen=True)
class FisherDiag:
    """Per-parameter Fisher diagonal for a named node subset."""

    values: np.ndarray
    subset_label: str
    subset_size: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "label": self.subset_label,
                "size": self.subset_size,
                "values": self.values.tolist(),
            }
        )

    @classmethod
    def from_json(cls, doc: str) -> "FisherDiag":
        raw = json.loads(doc)
        return cls(
            values=np.asarray(raw["values"], dtype=np.float64),
            subset_label=str(raw["label"]),
            subset_size=int(raw["size"]),
        )


def _csr_int64(p: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (
        np.asarray(p.indptr, dtype=np.int64),
        np.asarray(p.indices, dtype=np.int64),
        np.asarray(p.data, dtype=np.float64),
    )


def fisher_diag(
    p: sp.csr_matrix,
    x: np.ndarray,
    labels: np.ndarray,
    model: gcn.ModelState,
    subset: np.ndarray,
    label: str = "D",
    batch_mode: bool = False,
    trace: gcn.ForwardTrace | None = None,
    px: np.ndarray | None = None,
    backend: str = "auto",
) -> FisherDiag:
    """Empirical Fisher diagonal of the model over a node subset.

    The subset is deduplicated and sorted internally, so the result is
    invariant to input ordering. batch_mode squares the mean (batch)
    gradient instead of averaging per-sample squares; it exists for
    comparison only and is used nowhere in the unlearning pipeline.
    """
    subset = np.unique(np.asarray(subset, dtype=np.int64).ravel())
    if subset.size == 0:
        raise InputError("fisher subset must be nonempty")
    if subset.min() < 0 or subset.max() >= x.shape[0]:
        raise InputError("fisher subset references out-of-range node id")
    if np.any(labels[subset] < 0):
        raise InputError("fisher subset contains unlabeled nodes")

    if trace is None:
        trace = gcn.forward(p, x, model, px=px)

    if batch_mode:
        grad = gcn.backward(p, x, trace, labels, subset, model, px=px)
        return FisherDiag(values=grad * grad, subset_label=label, subset_size=int(subset.size))

    if px is None:
        indptr = np.asarray(p.indptr)
        rows = np.unique(
            np.concatenate([np.asarray(p.indices)[indptr[i]:indptr[i + 1]] for i in subset])
        )
        px = np.zeros((x.shape[0], x.shape[1]))
        px[rows] = p[rows] @ x
    px = np.ascontiguousarray(px, dtype=np.float64)

    s = trace.z[subset].copy()
    s[np.arange(subset.size), labels[subset]] -= 1.0
    wz = np.ascontiguousarray(s @ model.w1.T)
    relu = np.ascontiguousarray((trace.h1 > 0.0).astype(np.float64))

    w0_sq = np.zeros((model.d, model.h))
    kernel = get_w0_square_sum(backend)
    indptr64, indices64, data64 = _csr_int64(p)
    kernel(indptr64, indices64, data64, px, relu, wz, subset, w0_sq)

    a2 = np.asarray((p[subset] @ trace.h1)) ** 2
    w1_sq = a2.T @ (s * s)

    values = np.concatenate([w0_sq.ravel(), w1_sq.ravel()]) / subset.size
    return FisherDiag(values=values, subset_label=label, subset_size=int(subset.size))


def importance_ratios(
    f_num: FisherDiag | tuple[FisherDiag, FisherDiag],
    f_den: FisherDiag,
    eps: float = DEFAULT_EPS,
) -> np.ndarray:
    """Per-parameter importance ratios against a reference Fisher diagonal.

    Single form: F_num / (F_den + eps). Product form (f_num a pair):
    F_a * F_b / (F_den + eps)^2. The eps floor realizes the strictly-positive
    diagonal assumption for degenerate inputs.
    """
    if eps <= 0:
        raise InputError("eps must be positive")
    den = f_den.values + eps
    if isinstance(f_num, tuple):
        a, b = f_num
        if a.values.shape != den.shape or b.values.shape != den.shape:
            raise InputError("fisher diagonal lengths do not match")
        return (a.values * b.values) / (den * den)
    if f_num.values.shape != den.shape:
        raise InputError("fisher diagonal lengths do not match")
    return f_num.values / den
