"""Seeded synthetic graphs: stochastic block models and adversarial edges."""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .graph import GraphBundle

__all__ = ["generate_sbm", "inject_adversarial_edges"]

FEATURE_NOISE_SIGMA = 0.5
TRAIN_FRACTION = 0.9
_MAX_DRAW_ATTEMPTS = 1000


def generate_sbm(
    num_nodes: int,
    num_classes: int,
    p_in: float,
    p_out: float,
    feature_dim: int,
    seed: int,
    name: str = "sbm",
) -> GraphBundle:
    """Stochastic block model with equal-size blocks and one-hot+noise features.

    Block labels double as class labels. Features are a one-hot class signal
    plus N(0, 0.5^2) noise; the split is a seeded 90/10 train/test partition.
    Deterministic for a fixed seed.
    """
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise InputError("require 0 <= p_out <= p_in <= 1")
    if num_classes > num_nodes:
        raise InputError("num_classes cannot exceed num_nodes")
    if num_classes < 1 or feature_dim < 1:
        raise InputError("num_classes and feature_dim must be positive")

    rng = np.random.default_rng(seed)
    base = num_nodes // num_classes
    sizes = np.full(num_classes, base, dtype=np.int64)
    sizes[: num_nodes - base * num_classes] += 1
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), sizes)

    iu, ju = np.triu_indices(num_nodes, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, p_in, p_out)
    keep = rng.random(iu.shape[0]) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)

    features = rng.normal(0.0, FEATURE_NOISE_SIGMA, size=(num_nodes, feature_dim))
    features[np.arange(num_nodes), labels % feature_dim] += 1.0

    perm = rng.permutation(num_nodes)
    n_train = int(TRAIN_FRACTION * num_nodes)
    train_mask = np.zeros(num_nodes, dtype=bool)
    train_mask[perm[:n_train]] = True
    test_mask = ~train_mask

    return GraphBundle.from_edges(
        num_nodes=num_nodes,
        edges=edges,
        features=features,
        labels=labels,
        train_mask=train_mask,
        test_mask=test_mask,
        num_classes=num_classes,
        name=name,
    )


def inject_adversarial_edges(
    graph: GraphBundle, ratio: float, seed: int
) -> tuple[GraphBundle, np.ndarray]:
    """Add round(ratio * |E|) edges between training nodes of different classes.

    Injected edges never duplicate existing ones or each other; the returned
    (m, 2) list can be fed back as an edge-unlearning request to restore the
    original edge set exactly.
    """
    if not (0.0 <= ratio <= 1.0):
        raise InputError("ratio must lie in [0, 1]")
    count = int(round(ratio * graph.num_edges))
    if count == 0:
        return graph, np.empty((0, 2), dtype=np.int64)

    train = graph.train_nodes()
    train_labels = graph.labels[train]
    if np.unique(train_labels).size < 2:
        raise InputError("adversarial edges need at least two classes among training nodes")

    existing = set(map(tuple, graph.edge_list().tolist()))
    rng = np.random.default_rng(seed)
    injected: list[tuple[int, int]] = []
    chosen: set[tuple[int, int]] = set()
    for _ in range(count):
        for attempt in range(_MAX_DRAW_ATTEMPTS):
            u, v = train[rng.integers(0, train.size, size=2)]
            if u == v or graph.labels[u] == graph.labels[v]:
                continue
            key = (int(min(u, v)), int(max(u, v)))
            if key in existing or key in chosen:
                continue
            chosen.add(key)
            injected.append(key)
            break
        else:
            raise InputError(
                f"could not draw a fresh cross-class edge in {_MAX_DRAW_ATTEMPTS} attempts"
            )

    edge_arr = np.asarray(injected, dtype=np.int64)
    all_edges = np.concatenate([graph.edge_list(), edge_arr], axis=0)
    poisoned = GraphBundle.from_edges(
        num_nodes=graph.num_nodes,
        edges=all_edges,
        features=graph.features,
        labels=graph.labels,
        train_mask=graph.train_mask,
        test_mask=graph.test_mask,
        num_classes=graph.num_classes,
        name=graph.name,
    )
    return poisoned, edge_arr
