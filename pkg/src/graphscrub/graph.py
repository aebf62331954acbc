"""Graph representation, normalized propagation, and removal-set machinery.

A GraphBundle is an immutable undirected graph with dense float64 features,
integer labels, and a disjoint train/test split. Adjacency is stored in CSR
with no self-loops and no duplicate arcs; self-loops are added only when the
propagation operator is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import InputError

__all__ = [
    "GraphBundle",
    "NodeSubsets",
    "UnlearnRequest",
    "build_propagation",
    "k_hop_neighborhood",
    "remove_request",
    "affected_subgraph",
]


@dataclass(frozen=True)
class GraphBundle:
    """Immutable graph: CSR adjacency, features, labels, train/test masks."""

    num_nodes: int
    adjacency: sp.csr_matrix  # n x n, symmetric 0/1, zero diagonal
    features: np.ndarray      # n x d float64
    labels: np.ndarray        # n int64, values in [0, num_classes)
    train_mask: np.ndarray    # n bool
    test_mask: np.ndarray     # n bool
    num_classes: int
    name: str = "graph"

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Undirected edge count (each edge stored as two arcs)."""
        return self.adjacency.nnz // 2

    def edge_list(self) -> np.ndarray:
        """Canonical (m, 2) int64 array of undirected edges with u < v."""
        coo = self.adjacency.tocoo()
        keep = coo.row < coo.col
        edges = np.stack([coo.row[keep], coo.col[keep]], axis=1).astype(np.int64)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return edges[order]

    def train_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.train_mask).astype(np.int64)

    def test_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.test_mask).astype(np.int64)

    @cached_property
    def propagation_matrix(self) -> sp.csr_matrix:
        """Cached build_propagation(self); request-independent preprocessing."""
        return build_propagation(self)

    @cached_property
    def propagated(self) -> np.ndarray:
        """Cached P @ X, shared by training, Fisher, and gradient passes."""
        return np.ascontiguousarray(self.propagation_matrix @ self.features)

    def signature(self) -> tuple:
        """Cheap content fingerprint used to validate cached per-graph state."""
        step = max(1, self.num_nodes // 64)
        return (
            self.num_nodes,
            self.num_edges,
            self.feature_dim,
            int(self.labels.sum()),
            float(self.features[::step].sum()),
        )

    @classmethod
    def from_edges(
        cls,
        num_nodes: int,
        edges: np.ndarray,
        features: np.ndarray,
        labels: np.ndarray,
        train_mask: np.ndarray,
        test_mask: np.ndarray,
        num_classes: int,
        name: str = "graph",
    ) -> "GraphBundle":
        """Build a bundle from an (m, 2) undirected edge array, validating invariants."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        features = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
        labels = np.asarray(labels, dtype=np.int64)
        train_mask = np.asarray(train_mask, dtype=bool)
        test_mask = np.asarray(test_mask, dtype=bool)

        if features.ndim != 2 or features.shape[0] != num_nodes:
            raise InputError(f"features must be ({num_nodes}, d), got {features.shape}")
        if features.shape[1] < 1:
            raise InputError("feature_dim must be at least 1")
        if labels.shape != (num_nodes,):
            raise InputError(f"labels must have shape ({num_nodes},), got {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
            raise InputError("label values must lie in [0, num_classes)")
        if train_mask.shape != (num_nodes,) or test_mask.shape != (num_nodes,):
            raise InputError("train/test masks must have one entry per node")
        if np.any(train_mask & test_mask):
            raise InputError("train and test masks must be disjoint")
        if not np.all(train_mask | test_mask):
            raise InputError("every node must be in exactly one of train/test")

        if edges.size:
            if edges.min() < 0 or edges.max() >= num_nodes:
                raise InputError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise InputError("self-loops are not allowed in stored adjacency")
            canon = np.sort(edges, axis=1)
            uniq = np.unique(canon, axis=0)
            if uniq.shape[0] != canon.shape[0]:
                raise InputError("duplicate edges are not allowed")
            edges = uniq
        adjacency = _edges_to_csr(num_nodes, edges)
        return cls(
            num_nodes=num_nodes,
            adjacency=adjacency,
            features=features,
            labels=labels,
            train_mask=train_mask,
            test_mask=test_mask,
            num_classes=num_classes,
            name=name,
        )


def _edges_to_csr(num_nodes: int, edges: np.ndarray) -> sp.csr_matrix:
    """Symmetric 0/1 CSR from canonical (u < v) undirected edges."""
    if edges.size == 0:
        return sp.csr_matrix((num_nodes, num_nodes), dtype=np.float64)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(rows.shape[0], dtype=np.float64)
    adj = sp.coo_matrix((data, (rows, cols)), shape=(num_nodes, num_nodes))
    return adj.tocsr()


@dataclass(frozen=True)
class NodeSubsets:
    """Node subsets driving the unlearning pipeline.

    d_f: unlearned training nodes; d_k: their k-hop training neighborhood
    (excluding d_f); d_r: remaining training nodes; d_i: training subgraph
    affected by edge/feature removal (empty for the node task).
    """

    d_f: np.ndarray
    d_k: np.ndarray
    d_r: np.ndarray
    d_i: np.ndarray
    k: int


@dataclass(frozen=True)
class UnlearnRequest:
    """Tagged union of node / edge / feature removal sets.

    kind "node": node_ids are training nodes to remove entirely.
    kind "edge": edge_list is an (m, 2) array of undirected edges to remove.
    kind "feature": node_ids are nodes whose feature rows are zeroed.
    """

    kind: str
    node_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    edge_list: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))

    def __post_init__(self):
        if self.kind not in ("node", "edge", "feature"):
            raise InputError(f"unknown request kind {self.kind!r}")
        object.__setattr__(self, "node_ids", np.asarray(self.node_ids, dtype=np.int64).ravel())
        object.__setattr__(
            self, "edge_list", np.asarray(self.edge_list, dtype=np.int64).reshape(-1, 2)
        )

    @property
    def is_empty(self) -> bool:
        if self.kind == "edge":
            return self.edge_list.shape[0] == 0
        return self.node_ids.size == 0

    def validate(self, graph: GraphBundle) -> None:
        """Check all referenced ids against the graph; node kind must target training nodes."""
        if self.kind == "edge":
            e = self.edge_list
            if e.size and (e.min() < 0 or e.max() >= graph.num_nodes):
                raise InputError("edge request references out-of-range node id")
            return
        ids = self.node_ids
        if ids.size and (ids.min() < 0 or ids.max() >= graph.num_nodes):
            raise InputError(f"{self.kind} request references out-of-range node id")
        if self.kind == "node" and ids.size and not np.all(graph.train_mask[ids]):
            bad = ids[~graph.train_mask[ids]]
            raise InputError(
                f"node-unlearning request references non-training node(s) {bad.tolist()[:5]}; "
                "only training nodes are unlearnable"
            )


def build_propagation(graph: GraphBundle) -> sp.csr_matrix:
    """Symmetric-normalized propagation operator D^-1/2 (A + I) D^-1/2.

    Entries are products of the two endpoint scalings, so the matrix is
    bitwise symmetric. Every diagonal entry is positive because augmented
    degrees are at least one.
    """
    n = graph.num_nodes
    a_loop = (graph.adjacency + sp.identity(n, format="csr", dtype=np.float64)).tocoo()
    deg = np.asarray((graph.adjacency.sum(axis=1)).ravel()).ravel() + 1.0
    scale = 1.0 / np.sqrt(deg)
    data = scale[a_loop.row] * scale[a_loop.col]
    p = sp.csr_matrix((data, (a_loop.row, a_loop.col)), shape=(n, n))
    p.sort_indices()
    return p


def k_hop_neighborhood(graph: GraphBundle, seeds: np.ndarray, k: int) -> np.ndarray:
    """Nodes at shortest-path distance 1..k from any seed, excluding the seeds.

    Returns a sorted int64 array.
    """
    seeds = np.asarray(seeds, dtype=np.int64).ravel()
    if k < 0:
        raise InputError("k must be nonnegative")
    if seeds.size and (seeds.min() < 0 or seeds.max() >= graph.num_nodes):
        raise InputError("seed node id out of range")
    if k == 0 or seeds.size == 0:
        return np.empty(0, dtype=np.int64)

    indptr = graph.adjacency.indptr
    indices = graph.adjacency.indices
    visited = np.zeros(graph.num_nodes, dtype=bool)
    visited[seeds] = True
    frontier = seeds
    reached = []
    for _ in range(k):
        nxt = []
        for u in frontier:
            nxt.append(indices[indptr[u]:indptr[u + 1]])
        if not nxt:
            break
        cand = np.unique(np.concatenate(nxt)) if nxt else np.empty(0, dtype=np.int64)
        cand = cand[~visited[cand]]
        if cand.size == 0:
            break
        visited[cand] = True
        reached.append(cand)
        frontier = cand
    if not reached:
        return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate(reached)).astype(np.int64)


def remove_request(
    graph: GraphBundle, request: UnlearnRequest
) -> tuple[GraphBundle, np.ndarray]:
    """Apply a removal request, returning (new bundle, node id map).

    Node task: nodes, incident edges, and feature rows removed; surviving ids
    remapped densely. Edge task: listed edges removed in both directions.
    Feature task: listed nodes' feature rows zeroed. The map sends old ids to
    new ids, with -1 for removed nodes; it is the identity for edge/feature
    tasks.
    """
    request.validate(graph)
    identity = np.arange(graph.num_nodes, dtype=np.int64)

    if request.kind == "node":
        if request.node_ids.size == 0:
            return graph, identity
        keep = np.ones(graph.num_nodes, dtype=bool)
        keep[request.node_ids] = False
        node_map = np.full(graph.num_nodes, -1, dtype=np.int64)
        survivors = np.flatnonzero(keep)
        node_map[survivors] = np.arange(survivors.size)
        # submatrix of a symmetric loop-free 0/1 CSR preserves all invariants
        adjacency = graph.adjacency[survivors][:, survivors].tocsr()
        adjacency.sort_indices()
        new = GraphBundle(
            num_nodes=survivors.size,
            adjacency=adjacency,
            features=graph.features[survivors],
            labels=graph.labels[survivors],
            train_mask=graph.train_mask[survivors],
            test_mask=graph.test_mask[survivors],
            num_classes=graph.num_classes,
            name=graph.name,
        )
        return new, node_map

    if request.kind == "edge":
        if request.edge_list.shape[0] == 0:
            return graph, identity
        drop = np.unique(np.sort(request.edge_list, axis=1), axis=0)
        uu, vv = drop[:, 0], drop[:, 1]
        present = np.asarray(graph.adjacency[uu, vv]).ravel()
        if np.any(present == 0):
            bad = int(np.flatnonzero(present == 0)[0])
            raise InputError(f"edge ({uu[bad]}, {vv[bad]}) not present in graph")
        adjacency = graph.adjacency.copy()
        adjacency[uu, vv] = 0.0
        adjacency[vv, uu] = 0.0
        adjacency.eliminate_zeros()
        adjacency.sort_indices()
        new = replace(graph, adjacency=adjacency)
        return new, identity

    # feature task: zero the listed rows
    if request.node_ids.size == 0:
        return graph, identity
    features = graph.features.copy()
    features[request.node_ids] = 0.0
    new = replace(graph, features=features)
    return new, identity


def affected_subgraph(graph: GraphBundle, request: UnlearnRequest, k: int = 2) -> NodeSubsets:
    """Compute the unlearning node subsets for a request.

    Node task: d_f = requested nodes, d_k = their k-hop training
    neighborhood. Edge task: d_i = edge endpoints plus (k-1)-hop training
    neighbors, so the influence radius matches k propagation steps. Feature task:
    d_i = requested nodes plus k-hop training neighbors. d_r is always
    train \\ d_f.
    """
    request.validate(graph)
    if k < 0:
        raise InputError("k must be nonnegative")
    train = graph.train_nodes()
    empty = np.empty(0, dtype=np.int64)

    if request.kind == "node":
        d_f = np.unique(request.node_ids)
        hood = k_hop_neighborhood(graph, d_f, k) if d_f.size else empty
        d_k = hood[graph.train_mask[hood]] if hood.size else empty
        d_r = np.setdiff1d(train, d_f, assume_unique=True)
        return NodeSubsets(d_f=d_f, d_k=d_k, d_r=d_r, d_i=empty, k=k)

    if request.kind == "edge":
        seeds = np.unique(request.edge_list.ravel()) if request.edge_list.size else empty
        radius = max(k - 1, 0)
    else:
        seeds = np.unique(request.node_ids)
        radius = k
    if seeds.size:
        hood = k_hop_neighborhood(graph, seeds, radius) if radius > 0 else empty
        d_i = np.unique(np.concatenate([seeds, hood]))
        d_i = d_i[graph.train_mask[d_i]]
    else:
        d_i = empty
    return NodeSubsets(d_f=empty, d_k=empty, d_r=train, d_i=d_i, k=k)
