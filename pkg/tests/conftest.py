import numpy as np
import pytest

from graphscrub import GraphBundle


def make_bundle(num_nodes, edges, num_classes=2, feature_dim=3, seed=0, train_frac=0.8):
    """Small random-featured bundle over an explicit edge list."""
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((num_nodes, feature_dim))
    labels = rng.integers(0, num_classes, size=num_nodes)
    train_mask = np.zeros(num_nodes, dtype=bool)
    n_train = max(1, int(train_frac * num_nodes))
    train_mask[rng.permutation(num_nodes)[:n_train]] = True
    if train_mask.all():
        train_mask[-1] = False
    return GraphBundle.from_edges(
        num_nodes=num_nodes,
        edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        features=features,
        labels=labels,
        train_mask=train_mask,
        test_mask=~train_mask,
        num_classes=num_classes,
    )


def path_graph(n, **kwargs):
    return make_bundle(n, [(i, i + 1) for i in range(n - 1)], **kwargs)


def random_bundle(rng, num_nodes=None, num_classes=None, feature_dim=None, edge_prob=0.15):
    num_nodes = num_nodes or int(rng.integers(4, 20))
    num_classes = num_classes or int(rng.integers(2, 5))
    feature_dim = feature_dim or int(rng.integers(2, 6))
    iu, ju = np.triu_indices(num_nodes, k=1)
    keep = rng.random(iu.size) < edge_prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    return make_bundle(
        num_nodes, edges, num_classes=num_classes, feature_dim=feature_dim,
        seed=int(rng.integers(0, 2**31)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
