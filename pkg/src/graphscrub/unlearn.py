"""Training-free unlearning: Erase parameter editing plus Rectify correction.

Erase shrinks parameters whose Fisher-diagonal importance for the forget set
(and, jointly, for its propagation neighborhood) dominates their importance
for the whole training set; thresholds adapt per input as top-m-permille
quantiles of the importance ratios. Rectify then takes one gradient step on
an estimate of the remaining-data gradient assembled from the stored
training-gradient snapshot plus recomputation on the small affected subsets.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import gcn
from .errors import InputError, NumericError, SnapshotMissingError, StateError
from .fisher import DEFAULT_EPS, FisherDiag, fisher_diag, importance_ratios
from .graph import GraphBundle, UnlearnRequest, affected_subgraph, remove_request

__all__ = [
    "EraseConfig",
    "RectifyConfig",
    "UnlearnReport",
    "mask_baseline",
    "select_threshold",
    "erase",
    "erase_single_subset",
    "rectify_gradient",
    "rectify_gradient_single_subset",
    "rectify_update",
    "unlearn",
    "theorem_audit",
]


@dataclass(frozen=True)
class EraseConfig:
    m_permille: int = 10
    k_hops: int = 2
    a_override: float | None = None
    b_override: float | None = None
    eps: float = DEFAULT_EPS

    def validate(self) -> None:
        if not (0 <= self.m_permille <= 1000):
            raise InputError("m_permille must lie in [0, 1000]")
        if self.k_hops < 0:
            raise InputError("k_hops must be nonnegative")
        if self.eps <= 0:
            raise InputError("eps must be positive")


@dataclass(frozen=True)
class RectifyConfig:
    lam: float = 0.4

    def validate(self) -> None:
        if not (0.0 <= self.lam <= 0.9):
            raise InputError("lambda must lie in [0, 0.9]")


def _stats(values: np.ndarray) -> dict[str, float] | None:
    if values.size == 0:
        return None
    return {
        "min": float(values.min()),
        "mean": float(values.mean()),
        "max": float(values.max()),
    }


@dataclass
class UnlearnReport:
    """Machine-readable record of one unlearning run."""

    task: str = "node"
    branch1_count: int = 0
    branch2_count: int = 0
    gamma: float | None = None
    eta: float | None = None
    branch1_multiplier_stats: dict[str, float] | None = None
    branch2_multiplier_stats: dict[str, float] | None = None
    rectify_gradient_norm: float | None = None
    timings: dict[str, float] = field(default_factory=dict)
    sizes: dict[str, int] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    fisher_source: str = "snapshot"

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "branch1_count": self.branch1_count,
            "branch2_count": self.branch2_count,
            "gamma": self.gamma,
            "eta": self.eta,
            "branch1_multiplier_stats": self.branch1_multiplier_stats,
            "branch2_multiplier_stats": self.branch2_multiplier_stats,
            "rectify_gradient_norm": self.rectify_gradient_norm,
            "timings": self.timings,
            "sizes": self.sizes,
            "config": self.config,
            "fisher_source": self.fisher_source,
        }


def mask_baseline(model: gcn.ModelState, mask_set: np.ndarray) -> gcn.ModelState:
    """Zero the parameters in mask_set; snapshots are dropped."""
    mask_set = np.asarray(mask_set, dtype=np.int64).ravel()
    if mask_set.size and (mask_set.min() < 0 or mask_set.max() >= model.num_params):
        raise InputError("mask index out of range")
    omega = model.omega
    omega[mask_set] = 0.0
    return model.with_omega(omega)


def select_threshold(ratios: np.ndarray, m_permille: int) -> float:
    """The r-th largest ratio with r = ceil(m_permille * len / 1000).

    m_permille = 0 yields +inf (nothing selected downstream, which compares
    with >=). Ties at the returned value all select.
    """
    ratios = np.asarray(ratios, dtype=np.float64).ravel()
    if ratios.size == 0:
        raise InputError("ratios must be nonempty")
    r = (m_permille * ratios.size + 999) // 1000
    if r == 0:
        return math.inf
    r = min(int(r), ratios.size)
    return float(np.partition(ratios, ratios.size - r)[ratios.size - r])


def _apply_branches(
    model: gcn.ModelState,
    branches: list[tuple[np.ndarray, np.ndarray]],
) -> gcn.ModelState:
    omega = model.omega
    for selected, multipliers in branches:
        omega[selected] *= multipliers
    return model.with_omega(omega)


def erase(
    model: gcn.ModelState,
    f_d: FisherDiag,
    f_df: FisherDiag | None,
    f_dk: FisherDiag | None,
    config: EraseConfig | None = None,
) -> tuple[gcn.ModelState, UnlearnReport]:
    """Two-branch Erase for node unlearning.

    Branch 1 rescales parameters whose forget-set importance ratio reaches
    the adaptive threshold gamma by gamma/ratio; branch 2 (only where branch
    1 did not fire, and only when the neighborhood Fisher is available) does
    the same with the product ratio against eta. A zero threshold disables
    its branch: it would mean even the top-m-permille ratio carries no
    forget-set mass, and the prescribed multiplier would degenerate to 0.
    """
    config = config or EraseConfig()
    config.validate()
    n = model.num_params
    if f_d.values.shape != (n,):
        raise InputError("F_D length does not match the model")
    report = UnlearnReport(
        task="node",
        config={"m_permille": config.m_permille, "k_hops": config.k_hops},
    )
    if f_df is None or f_df.subset_size == 0:
        return model, report
    if f_df.values.shape != (n,):
        raise InputError("F_Df length does not match the model")
    if f_dk is not None and f_dk.values.shape != (n,):
        raise InputError("F_Dk length does not match the model")

    ratio1 = importance_ratios(f_df, f_d, config.eps)
    gamma = select_threshold(ratio1, config.m_permille)
    report.gamma = None if math.isinf(gamma) else gamma
    branches: list[tuple[np.ndarray, np.ndarray]] = []

    sel1 = np.zeros(n, dtype=bool)
    if math.isfinite(gamma) and gamma > 0.0:
        sel1 = ratio1 >= gamma
        a = config.a_override if config.a_override is not None else gamma
        mult1 = a / ratio1[sel1]
        branches.append((np.flatnonzero(sel1), mult1))
        report.branch1_count = int(sel1.sum())
        report.branch1_multiplier_stats = _stats(mult1)

    if f_dk is not None and f_dk.subset_size > 0:
        ratio2 = importance_ratios((f_df, f_dk), f_d, config.eps)
        eta = select_threshold(ratio2, config.m_permille)
        report.eta = None if math.isinf(eta) else eta
        if math.isfinite(eta) and eta > 0.0:
            sel2 = (ratio2 >= eta) & ~sel1
            b = config.b_override if config.b_override is not None else eta
            mult2 = b / ratio2[sel2]
            branches.append((np.flatnonzero(sel2), mult2))
            report.branch2_count = int(sel2.sum())
            report.branch2_multiplier_stats = _stats(mult2)

    return _apply_branches(model, branches), report


def erase_single_subset(
    model: gcn.ModelState,
    f_d: FisherDiag,
    f_di: FisherDiag | None,
    config: EraseConfig | None = None,
) -> tuple[gcn.ModelState, UnlearnReport]:
    """Single-branch Erase over the affected subgraph (edge/feature tasks)."""
    config = config or EraseConfig()
    config.validate()
    n = model.num_params
    if f_d.values.shape != (n,):
        raise InputError("F_D length does not match the model")
    report = UnlearnReport(
        task="affected-subset",
        config={"m_permille": config.m_permille, "k_hops": config.k_hops},
    )
    if f_di is None or f_di.subset_size == 0:
        return model, report
    if f_di.values.shape != (n,):
        raise InputError("F_Di length does not match the model")

    ratio = importance_ratios(f_di, f_d, config.eps)
    gamma = select_threshold(ratio, config.m_permille)
    report.gamma = None if math.isinf(gamma) else gamma
    if not (math.isfinite(gamma) and gamma > 0.0):
        return model, report
    sel = ratio >= gamma
    a = config.a_override if config.a_override is not None else gamma
    mult = a / ratio[sel]
    report.branch1_count = int(sel.sum())
    report.branch1_multiplier_stats = _stats(mult)
    return _apply_branches(model, [(np.flatnonzero(sel), mult)]), report


def rectify_gradient(
    snapshot: np.ndarray | None,
    n_total: int,
    n_forget: int,
    n_hood: int,
    n_remain: int,
    grad_forget: np.ndarray | None = None,
    grad_hood_star: np.ndarray | None = None,
    grad_hood_edited: np.ndarray | None = None,
) -> np.ndarray:
    """Estimate the edited model's mean gradient over the remaining nodes.

    (|D| g_D - |Df| g_Df - |Dk| g_Dk(w*) + |Dk| g_Dk(w_hat)) / |Dr|, where
    g_D is the stored snapshot and the neighborhood pair is combined as a
    difference so it cancels exactly when nothing changed.
    """
    if snapshot is None:
        raise SnapshotMissingError()
    if n_remain <= 0:
        raise InputError("remaining set must be nonempty")
    acc = (n_total / n_remain) * snapshot
    if n_forget > 0:
        if grad_forget is None:
            raise InputError("forget-set gradient required when the forget set is nonempty")
        acc -= (n_forget / n_remain) * grad_forget
    if n_hood > 0:
        if grad_hood_star is None or grad_hood_edited is None:
            raise InputError("both neighborhood gradients required when D_k is nonempty")
        acc -= (n_hood / n_remain) * (grad_hood_star - grad_hood_edited)
    return acc


def rectify_gradient_single_subset(
    snapshot: np.ndarray | None,
    n_total: int,
    n_affected: int,
    n_remain: int,
    grad_affected_star: np.ndarray | None = None,
    grad_affected_edited: np.ndarray | None = None,
) -> np.ndarray:
    """Edge/feature variant: (|D| g_D - |Di| g_Di(w*) + |Di| g_Di(w_hat)) / |Dr|."""
    if snapshot is None:
        raise SnapshotMissingError()
    if n_remain <= 0:
        raise InputError("remaining set must be nonempty")
    acc = (n_total / n_remain) * snapshot
    if n_affected > 0:
        if grad_affected_star is None or grad_affected_edited is None:
            raise InputError("both affected-subset gradients required when D_i is nonempty")
        acc -= (n_affected / n_remain) * (grad_affected_star - grad_affected_edited)
    return acc


def rectify_update(
    model_hat: gcn.ModelState, gradient: np.ndarray, config: RectifyConfig | None = None
) -> gcn.ModelState:
    """One plain gradient step: omega' = omega_hat - lambda * gradient."""
    config = config or RectifyConfig()
    config.validate()
    gradient = np.asarray(gradient, dtype=np.float64).ravel()
    if gradient.shape != (model_hat.num_params,):
        raise InputError("gradient length does not match the model")
    if not np.all(np.isfinite(gradient)):
        raise NumericError("rectify gradient contains non-finite entries")
    if config.lam == 0.0:
        return model_hat.with_omega(model_hat.omega)
    return model_hat.with_omega(model_hat.omega - config.lam * gradient)


def unlearn(
    model: gcn.ModelState,
    graph: GraphBundle,
    request: UnlearnRequest,
    erase_cfg: EraseConfig | None = None,
    rectify_cfg: RectifyConfig | None = None,
) -> tuple[gcn.ModelState, UnlearnReport]:
    """Full pipeline: subsets -> Fisher -> Erase -> removal -> Rectify.

    Requires a model trained on this graph with its gradient snapshot. Apart
    from the stored snapshots, only the forget set, its neighborhood, and the
    affected subgraph are touched. The returned model carries no snapshots;
    chained requests must retrain or re-derive them on the remaining graph.
    """
    erase_cfg = erase_cfg or EraseConfig()
    rectify_cfg = rectify_cfg or RectifyConfig()
    erase_cfg.validate()
    rectify_cfg.validate()
    if model.grad_snapshot is None:
        raise SnapshotMissingError()
    train_nodes = graph.train_nodes()
    if model.train_size != train_nodes.size:
        raise StateError(
            f"model was trained on {model.train_size} nodes but the graph has "
            f"{train_nodes.size} training nodes"
        )

    report = UnlearnReport(
        task=request.kind,
        config={
            "m_permille": erase_cfg.m_permille,
            "k_hops": erase_cfg.k_hops,
            "lambda": rectify_cfg.lam,
        },
    )
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    subsets = affected_subgraph(graph, request, erase_cfg.k_hops)
    report.timings["subsets_s"] = time.perf_counter() - t0

    p = graph.propagation_matrix
    x = graph.features
    labels = graph.labels
    px = graph.propagated
    if model.final_trace is not None and model.graph_signature == graph.signature():
        trace = model.final_trace  # memoized last training forward
    else:
        trace = gcn.forward(p, x, model, px=px)

    t0 = time.perf_counter()
    if model.fisher_snapshot is not None:
        f_d = FisherDiag(
            values=model.fisher_snapshot, subset_label="D", subset_size=model.train_size
        )
        report.fisher_source = "snapshot"
    else:
        f_d = fisher_diag(p, x, labels, model, train_nodes, label="D", trace=trace, px=px)
        report.fisher_source = "recomputed"

    if request.kind == "node":
        f_df = (
            fisher_diag(p, x, labels, model, subsets.d_f, label="D_f", trace=trace, px=px)
            if subsets.d_f.size
            else None
        )
        f_dk = (
            fisher_diag(p, x, labels, model, subsets.d_k, label="D_k", trace=trace, px=px)
            if subsets.d_k.size
            else None
        )
    else:
        f_di = (
            fisher_diag(p, x, labels, model, subsets.d_i, label="D_i", trace=trace, px=px)
            if subsets.d_i.size
            else None
        )
    report.timings["fisher_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if request.kind == "node":
        edited, erase_report = erase(model, f_d, f_df, f_dk, erase_cfg)
    else:
        edited, erase_report = erase_single_subset(model, f_d, f_di, erase_cfg)
    report.branch1_count = erase_report.branch1_count
    report.branch2_count = erase_report.branch2_count
    report.gamma = erase_report.gamma
    report.eta = erase_report.eta
    report.branch1_multiplier_stats = erase_report.branch1_multiplier_stats
    report.branch2_multiplier_stats = erase_report.branch2_multiplier_stats
    report.timings["erase_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    remaining, node_map = remove_request(graph, request)
    report.timings["removal_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    n_total = model.train_size
    if request.kind == "node":
        n_forget, n_hood = subsets.d_f.size, subsets.d_k.size
        n_remain = subsets.d_r.size
        grad_forget = (
            gcn.backward(p, x, trace, labels, subsets.d_f, model, px=px)
            if n_forget
            else None
        )
        grad_hood_star = (
            gcn.backward(p, x, trace, labels, subsets.d_k, model, px=px) if n_hood else None
        )
        grad_hood_edited = None
        if n_hood:
            p_r = remaining.propagation_matrix
            trace_r = gcn.forward(p_r, remaining.features, edited)
            mapped = node_map[subsets.d_k]
            grad_hood_edited = gcn.backward(
                p_r, remaining.features, trace_r, remaining.labels, mapped, edited
            )
        gradient = rectify_gradient(
            model.grad_snapshot,
            n_total,
            n_forget,
            n_hood,
            n_remain,
            grad_forget,
            grad_hood_star,
            grad_hood_edited,
        )
    else:
        n_affected = subsets.d_i.size
        n_remain = n_total
        grad_aff_star = (
            gcn.backward(p, x, trace, labels, subsets.d_i, model, px=px)
            if n_affected
            else None
        )
        grad_aff_edited = None
        if n_affected:
            p_r = remaining.propagation_matrix
            trace_r = gcn.forward(p_r, remaining.features, edited)
            grad_aff_edited = gcn.backward(
                p_r, remaining.features, trace_r, remaining.labels, subsets.d_i, edited
            )
        gradient = rectify_gradient_single_subset(
            model.grad_snapshot, n_total, n_affected, n_remain, grad_aff_star, grad_aff_edited
        )
    report.rectify_gradient_norm = float(np.linalg.norm(gradient))
    final = rectify_update(edited, gradient, rectify_cfg)
    final = gcn.ModelState(
        w0=final.w0, w1=final.w1, grad_snapshot=None, fisher_snapshot=None, train_size=n_remain
    )
    report.timings["rectify_s"] = time.perf_counter() - t0

    report.sizes = {
        "d_total": int(n_total),
        "d_f": int(subsets.d_f.size),
        "d_k": int(subsets.d_k.size),
        "d_i": int(subsets.d_i.size),
        "d_r": int(n_remain),
        "num_params": int(model.num_params),
    }
    report.timings["total_s"] = time.perf_counter() - t_start
    return final, report


def theorem_audit(
    model_star: gcn.ModelState,
    model_retrained: gcn.ModelState | None,
    f_d: FisherDiag,
    f_df: FisherDiag,
    f_dr: FisherDiag,
    mask_set: np.ndarray,
    eps: float = DEFAULT_EPS,
) -> dict[str, Any]:
    """Numeric audit of the masking bound's quantities (diagnostic only).

    Computes Q (mean squared gap between retrained parameters and the masked
    model), the diagonal b-vectors, the constants c1..c3, the bound's right
    side, and the critical ratio sqrt(c1/c2). The inequality is reported,
    never asserted; the diagonal b approximation makes c collapse to
    |D| / |D_f|.
    """
    if model_retrained is None:
        raise StateError("theorem audit requires the retrained oracle model")
    if model_retrained.num_params != model_star.num_params:
        raise InputError("models disagree on parameter count")
    mask_set = np.asarray(mask_set, dtype=np.int64).ravel()
    n = model_star.num_params

    omega_star = model_star.omega
    omega_r = model_retrained.omega
    omega_hat = mask_baseline(model_star, mask_set).omega
    q = float(np.mean((omega_r - omega_hat) ** 2))

    b = f_d.values * omega_star
    b_r = f_dr.values * omega_r
    ratio_f = f_df.subset_size / f_d.subset_size
    ratio_r = f_dr.subset_size / f_d.subset_size
    c1 = float(np.max(b_r**2)) if n else 0.0
    c2 = float(np.max((b_r * ratio_f) ** 2)) if n else 0.0
    den_d = f_d.values + eps
    den_r = f_dr.values + eps
    c3 = float(np.sum((b - b_r * ratio_r) ** 2 * 2.0 / den_d**2))

    in_mask = np.zeros(n, dtype=bool)
    in_mask[mask_set] = True
    term_mask = float(np.sum(1.0 / den_r[in_mask] ** 2))
    term_rest = float(
        np.sum(f_df.values[~in_mask] ** 2 / (den_d[~in_mask] ** 2 * den_r[~in_mask] ** 2))
    )
    rhs = (c1 * term_mask + c2 * term_rest + c3) / n

    critical_ratio = math.sqrt(c1 / c2) if c2 > 0.0 else math.inf
    return {
        "q": q,
        "rhs": rhs,
        "bound_holds": bool(q <= rhs),
        "c1": c1,
        "c2": c2,
        "c3": c3,
        "critical_ratio": critical_ratio,
        "b_stats": _stats(np.abs(b)),
        "b_r_stats": _stats(np.abs(b_r)),
        "mask_size": int(mask_set.size),
        "num_params": int(n),
        "sizes": {
            "d_total": f_d.subset_size,
            "d_f": f_df.subset_size,
            "d_r": f_dr.subset_size,
        },
    }
