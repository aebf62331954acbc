"""Retrain oracle, metrics, and the adversarial-edge efficacy experiment."""

from __future__ import annotations

import time
import tracemalloc
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import InputError
from .gcn import ModelState, TrainConfig, predict, train
from .graph import GraphBundle, UnlearnRequest, remove_request
from .synth import inject_adversarial_edges
from .unlearn import EraseConfig, RectifyConfig, unlearn

__all__ = [
    "EvalResult",
    "CSV_HEADER",
    "retrain_oracle",
    "micro_f1",
    "rms_param_distance",
    "gradient_diff",
    "adversarial_experiment",
    "measure",
    "rows_to_csv",
]

CSV_HEADER = "ratio,seed,method,f1,rms_dist,ad,rd,time_s"


@dataclass(frozen=True)
class EvalResult:
    micro_f1: float
    rms_param_distance: float | None = None
    grad_ad: float | None = None
    grad_rd: float | None = None
    wall_time_s: float | None = None
    peak_mem_estimate_bytes: int | None = None


def retrain_oracle(
    graph: GraphBundle, request: UnlearnRequest, config: TrainConfig
) -> ModelState:
    """Gold standard: apply the removal, then train from scratch (same seed)."""
    remaining, _ = remove_request(graph, request)
    return train(remaining, config)


def micro_f1(predictions: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Fraction of mask nodes predicted correctly (micro-F1 == accuracy here)."""
    mask = np.asarray(mask, dtype=np.int64).ravel()
    if mask.size == 0:
        raise InputError("micro_f1 mask must be nonempty")
    return float(np.mean(predictions[mask] == labels[mask]))


def rms_param_distance(a: ModelState, b: ModelState) -> float:
    """Root mean square gap between two flattened parameter vectors."""
    if a.num_params != b.num_params:
        raise InputError("models disagree on parameter count")
    diff = a.omega - b.omega
    return float(np.sqrt(np.mean(diff * diff)))


def gradient_diff(approx: np.ndarray, true: np.ndarray) -> tuple[float, float]:
    """(mean absolute difference, relative L2 difference) of two gradients."""
    approx = np.asarray(approx, dtype=np.float64).ravel()
    true = np.asarray(true, dtype=np.float64).ravel()
    if approx.shape != true.shape:
        raise InputError("gradient lengths do not match")
    ad = float(np.mean(np.abs(approx - true)))
    rd = float(np.linalg.norm(approx - true) / (np.linalg.norm(true) + 1e-12))
    return ad, rd


def adversarial_experiment(
    graph: GraphBundle,
    attack_ratios: list[float],
    train_cfg: TrainConfig,
    erase_cfg: EraseConfig | None = None,
    rectify_cfg: RectifyConfig | None = None,
    seed: int = 0,
) -> list[dict[str, Any]]:
    """Poison -> train -> unlearn-the-poison -> compare against clean retrain.

    For each ratio, cross-class edges are injected among training nodes, a
    model is trained on the poisoned graph, the injected edges are unlearned
    through the edge-task pipeline, and a clean retrain provides the
    reference. All F1 numbers are on the clean test split; the vanilla model
    propagates over its own (poisoned) graph, the others over the cleaned
    graph.
    """
    erase_cfg = erase_cfg or EraseConfig()
    rectify_cfg = rectify_cfg or RectifyConfig()
    test = graph.test_nodes()
    rows: list[dict[str, Any]] = []
    for ratio in attack_ratios:
        if not (0.0 <= ratio <= 1.0):
            raise InputError("attack ratios must lie in [0, 1]")
        poisoned, injected = inject_adversarial_edges(graph, ratio, seed)
        request = UnlearnRequest(kind="edge", edge_list=injected)

        t0 = time.perf_counter()
        vanilla = train(poisoned, train_cfg)
        vanilla_time = time.perf_counter() - t0
        vanilla_f1 = micro_f1(predict(poisoned, vanilla), graph.labels, test)

        t0 = time.perf_counter()
        unlearned, _ = unlearn(vanilla, poisoned, request, erase_cfg, rectify_cfg)
        unlearn_time = time.perf_counter() - t0
        cleaned, _ = remove_request(poisoned, request)
        unlearned_f1 = micro_f1(predict(cleaned, unlearned), graph.labels, test)

        t0 = time.perf_counter()
        retrained = retrain_oracle(poisoned, request, train_cfg)
        retrain_time = time.perf_counter() - t0
        retrain_f1 = micro_f1(predict(cleaned, retrained), graph.labels, test)

        rows.append(
            {
                "ratio": float(ratio),
                "seed": int(seed),
                "vanilla_f1": vanilla_f1,
                "unlearned_f1": unlearned_f1,
                "retrain_f1": retrain_f1,
                "vanilla_time_s": vanilla_time,
                "unlearn_time_s": unlearn_time,
                "retrain_time_s": retrain_time,
                "injected_edges": int(injected.shape[0]),
                "eval_split": "clean-test",
            }
        )
    return rows


def measure(run: Callable[[], Any]) -> tuple[float, int]:
    """Wall time and peak-memory estimate (tracemalloc allocator statistics).

    The memory number tracks Python-visible allocations only and is an
    estimate; tracing also slows allocation-heavy code somewhat.
    """
    tracemalloc.start()
    t0 = time.perf_counter()
    run()
    wall = time.perf_counter() - t0
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return wall, int(peak)


def _fmt_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def rows_to_csv(rows: list[dict[str, Any]]) -> str:
    """Long-format experiment CSV with the fixed header.

    Wide rows from adversarial_experiment expand to one line per method.
    """
    lines = [CSV_HEADER]
    for row in rows:
        if "method" in row:
            lines.append(
                ",".join(
                    _fmt_cell(row.get(key))
                    for key in ("ratio", "seed", "method", "f1", "rms_dist", "ad", "rd", "time_s")
                )
            )
            continue
        for method, f1_key, time_key in (
            ("vanilla", "vanilla_f1", "vanilla_time_s"),
            ("unlearned", "unlearned_f1", "unlearn_time_s"),
            ("retrain", "retrain_f1", "retrain_time_s"),
        ):
            lines.append(
                ",".join(
                    _fmt_cell(v)
                    for v in (
                        row.get("ratio"),
                        row.get("seed"),
                        method,
                        row.get(f1_key),
                        row.get("rms_dist"),
                        row.get("ad"),
                        row.get("rd"),
                        row.get(time_key),
                    )
                )
            )
    return "\n".join(lines) + "\n"
