"""Two-layer GCN: forward pass, closed-form backprop, and full-batch training.

The architecture is H1 = relu(P X W0), H2 = P H1 W1, Z = softmax(H2), with
cross-entropy over labeled nodes. All math is float64 and single-threaded
numpy, so training is bitwise deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import InputError, TrainingDivergenceError
from .graph import GraphBundle

__all__ = [
    "ModelState",
    "ForwardTrace",
    "TrainConfig",
    "forward",
    "loss",
    "backward",
    "per_node_gradient",
    "train",
    "predict",
    "save_model",
    "load_model",
]

Z_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelState:
    """GCN parameters plus the snapshots stored at the end of training.

    grad_snapshot is the training-set gradient at the final parameters;
    fisher_snapshot is the per-sample Fisher diagonal over the training set
    at the same point. Both are None on models produced by editing.

    final_trace memoizes the forward state of the last training iteration
    (train computes it anyway for the snapshots); graph_signature records
    which graph it belongs to. Neither survives serialization; consumers
    recompute the trace when the memo is absent or the graph changed.
    """

    w0: np.ndarray  # d x h
    w1: np.ndarray  # h x C
    grad_snapshot: np.ndarray | None = None
    fisher_snapshot: np.ndarray | None = None
    train_size: int = 0
    final_trace: "ForwardTrace | None" = field(default=None, repr=False, compare=False)
    graph_signature: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def d(self) -> int:
        return self.w0.shape[0]

    @property
    def h(self) -> int:
        return self.w0.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w1.shape[1]

    @property
    def num_params(self) -> int:
        return self.w0.size + self.w1.size

    @property
    def omega(self) -> np.ndarray:
        """Flattened view: vec(w0) then vec(w1), row-major."""
        return np.concatenate([self.w0.ravel(), self.w1.ravel()])

    def with_omega(self, omega: np.ndarray, train_size: int | None = None) -> "ModelState":
        """New state from a flattened parameter vector; snapshots are dropped."""
        omega = np.asarray(omega, dtype=np.float64)
        if omega.shape != (self.num_params,):
            raise InputError(f"omega must have length {self.num_params}, got {omega.shape}")
        w0 = omega[: self.w0.size].reshape(self.w0.shape).copy()
        w1 = omega[self.w0.size :].reshape(self.w1.shape).copy()
        return ModelState(
            w0=w0,
            w1=w1,
            grad_snapshot=None,
            fisher_snapshot=None,
            train_size=self.train_size if train_size is None else train_size,
        )


@dataclass(frozen=True)
class ForwardTrace:
    h1: np.ndarray  # n x h, post-relu
    h2: np.ndarray  # n x C, pre-softmax
    z: np.ndarray   # n x C, softmax rows


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 256
    epochs: int = 100
    learning_rate: float = 0.05
    weight_decay: float = 5e-5
    seed: int = 0
    init_scale: float = 1.0
    store_fisher: bool = True
    force: bool = False  # skip range validation of lr / weight_decay

    def validate(self) -> None:
        if self.force:
            return
        if not (1e-4 <= self.learning_rate <= 1e-1):
            raise InputError("learning_rate outside [1e-4, 1e-1]; pass force=True to override")
        if not (0.0 <= self.weight_decay <= 1e-2):
            raise InputError("weight_decay outside [0, 1e-2]; pass force=True to override")
        if self.hidden_dim < 1 or self.epochs < 1:
            raise InputError("hidden_dim and epochs must be positive")


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def propagated_features(p: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """P @ X, the per-graph constant shared by forward, backward, and Fisher."""
    return np.ascontiguousarray(p @ x)


def forward(
    p: sp.csr_matrix,
    x: np.ndarray,
    model: ModelState,
    px: np.ndarray | None = None,
) -> ForwardTrace:
    """Run the two-layer GCN; pass a precomputed px = P @ X to skip that product."""
    if x.shape[1] != model.d:
        raise InputError(f"feature dim {x.shape[1]} does not match model d={model.d}")
    if p.shape[0] != x.shape[0]:
        raise InputError("propagation matrix and features disagree on node count")
    if px is not None:
        h1 = np.maximum(px @ model.w0, 0.0)
    else:
        h1 = np.maximum(p @ (x @ model.w0), 0.0)
    h2 = (p @ h1) @ model.w1
    z = _softmax_rows(h2)
    return ForwardTrace(h1=h1, h2=h2, z=z)


def loss(trace: ForwardTrace, labels: np.ndarray, mask: np.ndarray) -> float:
    """Mean negative log-probability of the true class over the mask nodes."""
    mask = np.asarray(mask, dtype=np.int64).ravel()
    if mask.size == 0:
        raise InputError("loss mask must be nonempty")
    probs = trace.z[mask, labels[mask]]
    return float(-np.log(np.maximum(probs, Z_FLOOR)).mean())


def _grad_matrices(
    p: sp.csr_matrix,
    x: np.ndarray,
    px: np.ndarray | None,
    trace: ForwardTrace,
    labels: np.ndarray,
    mask: np.ndarray,
    model: ModelState,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (dW0, dW1) of the mean cross-entropy over mask.

    dW1 = H1^T P^T G and dW0 = X^T P^T [(P^T G W1^T) . relu'(P X W0)] with
    G = (Z - Y)/|mask| zeroed outside the mask. When the mask's 1-hop ball
    is small the dense products restrict to those rows.
    """
    n = trace.z.shape[0]
    g_out = np.zeros_like(trace.z)
    g_out[mask] = trace.z[mask]
    g_out[mask, labels[mask]] -= 1.0
    g_out[mask] /= mask.size

    ph1_mask = p[mask] @ trace.h1  # (P H1) rows at mask, P symmetric
    dw1 = ph1_mask.T @ g_out[mask]

    pg = p @ g_out  # P^T G, nonzero only on the mask's 1-hop ball
    nz = np.flatnonzero(np.abs(pg).max(axis=1) > 0.0)
    if nz.size < n // 2:
        g_pre = pg[nz] @ model.w1.T
        g_pre *= trace.h1[nz] > 0.0
        px_rows = px[nz] if px is not None else p[nz] @ x
        dw0 = px_rows.T @ g_pre
    else:
        g_pre = pg @ model.w1.T
        g_pre *= trace.h1 > 0.0
        if px is not None:
            dw0 = px.T @ g_pre
        else:
            dw0 = x.T @ (p @ g_pre)  # X^T P^T, avoiding a P @ X materialization
    return dw0, dw1


def backward(
    p: sp.csr_matrix,
    x: np.ndarray,
    trace: ForwardTrace,
    labels: np.ndarray,
    mask: np.ndarray,
    model: ModelState,
    px: np.ndarray | None = None,
) -> np.ndarray:
    """Exact gradient of loss(trace, labels, mask) in flattened omega order."""
    mask = np.asarray(mask, dtype=np.int64).ravel()
    if mask.size == 0:
        raise InputError("backward mask must be nonempty")
    if trace.h1.shape != (x.shape[0], model.h) or trace.z.shape[1] != model.num_classes:
        raise InputError("trace does not match model/input dimensions")
    dw0, dw1 = _grad_matrices(p, x, px, trace, labels, mask, model)
    return np.concatenate([dw0.ravel(), dw1.ravel()])


def per_node_gradient(
    p: sp.csr_matrix,
    x: np.ndarray,
    labels: np.ndarray,
    model: ModelState,
    node: int,
    trace: ForwardTrace | None = None,
    px: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient of -log Z[node, y_node] w.r.t. omega (per-sample, unscaled)."""
    if labels[node] < 0:
        raise InputError(f"node {node} has no label")
    if trace is None:
        trace = forward(p, x, model, px=px)
    mask = np.asarray([node], dtype=np.int64)
    dw0, dw1 = _grad_matrices(p, x, px, trace, labels, mask, model)
    return np.concatenate([dw0.ravel(), dw1.ravel()])


def train(graph: GraphBundle, config: TrainConfig) -> ModelState:
    """Full-batch gradient descent with weight decay, Glorot-uniform init.

    After the final update the training-set gradient and (optionally) the
    per-sample Fisher diagonal are evaluated at the final parameters and
    stored on the returned state.
    """
    config.validate()
    d, h, c = graph.feature_dim, config.hidden_dim, graph.num_classes
    rng = np.random.default_rng(config.seed)
    lim0 = np.sqrt(6.0 / (d + h)) * config.init_scale
    lim1 = np.sqrt(6.0 / (h + c)) * config.init_scale
    w0 = rng.uniform(-lim0, lim0, size=(d, h))
    w1 = rng.uniform(-lim1, lim1, size=(h, c))
    model = ModelState(w0=w0, w1=w1)

    p = graph.propagation_matrix
    x = graph.features
    px = graph.propagated
    mask = graph.train_nodes()
    if mask.size == 0:
        raise InputError("graph has no training nodes")
    labels = graph.labels

    lr, wd = config.learning_rate, config.weight_decay
    for epoch in range(config.epochs):
        trace = forward(p, x, model, px=px)
        epoch_loss = loss(trace, labels, mask)
        if not np.isfinite(epoch_loss):
            raise TrainingDivergenceError(epoch)
        grad = backward(p, x, trace, labels, mask, model, px=px)
        omega = model.omega
        omega -= lr * (grad + wd * omega)
        model = model.with_omega(omega)

    trace = forward(p, x, model, px=px)
    snapshot = backward(p, x, trace, labels, mask, model, px=px)
    fisher_snapshot = None
    if config.store_fisher:
        from .fisher import fisher_diag

        fisher_snapshot = fisher_diag(
            p, x, labels, model, mask, label="D", trace=trace, px=px
        ).values
    return ModelState(
        w0=model.w0,
        w1=model.w1,
        grad_snapshot=snapshot,
        fisher_snapshot=fisher_snapshot,
        train_size=int(mask.size),
        final_trace=trace,
        graph_signature=graph.signature(),
    )


def predict(graph: GraphBundle, model: ModelState) -> np.ndarray:
    """Argmax class per node; ties break toward the smallest class id."""
    trace = forward(graph.propagation_matrix, graph.features, model, px=graph.propagated)
    return np.argmax(trace.z, axis=1).astype(np.int64)


def _fmt_array(arr: np.ndarray | None) -> str:
    if arr is None:
        return "null"
    return "[" + ",".join(f"{v:.17g}" for v in arr.ravel()) + "]"


def save_model(model: ModelState, path: str) -> None:
    """Write the model JSON with 17-significant-digit floats (exact round-trip)."""
    doc = (
        "{"
        f'"d":{model.d},"h":{model.h},"C":{model.num_classes},'
        f'"w0":{_fmt_array(model.w0)},"w1":{_fmt_array(model.w1)},'
        f'"grad_snapshot":{_fmt_array(model.grad_snapshot)},'
        f'"fisher_snapshot":{_fmt_array(model.fisher_snapshot)},'
        f'"train_size":{model.train_size}'
        "}"
    )
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(doc)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path: str) -> ModelState:
    with open(path) as fh:
        doc = json.load(fh)
    d, h, c = int(doc["d"]), int(doc["h"]), int(doc["C"])
    w0 = np.asarray(doc["w0"], dtype=np.float64).reshape(d, h)
    w1 = np.asarray(doc["w1"], dtype=np.float64).reshape(h, c)
    num_params = d * h + h * c

    def _load_vec(key: str) -> np.ndarray | None:
        raw = doc.get(key)
        if raw is None:
            return None
        vec = np.asarray(raw, dtype=np.float64)
        if vec.shape != (num_params,):
            raise InputError(f"{key} has length {vec.size}, expected {num_params}")
        return vec

    return ModelState(
        w0=w0,
        w1=w1,
        grad_snapshot=_load_vec("grad_snapshot"),
        fisher_snapshot=_load_vec("fisher_snapshot"),
        train_size=int(doc.get("train_size", 0)),
    )
