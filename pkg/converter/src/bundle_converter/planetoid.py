"""Parsing and assembly of the planetoid-distribution citation datasets.

Each dataset ships as eight files: pickled sparse feature blocks (x, tx,
allx), one-hot label blocks (y, ty, ally), a neighbor-dict graph, and the
test-node index list. Assembly follows the distribution's conventions:
allx/tx stack into the full feature matrix with test rows permuted back
into graph order, and CiteSeer's gap of isolated test nodes is filled with
zero rows (those nodes end up labeled class 0 by argmax).
"""

from __future__ import annotations

import os
import pickle
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

DATASETS = ("cora", "citeseer", "pubmed")
FILE_SUFFIXES = ("x", "y", "tx", "ty", "allx", "ally", "graph", "test.index")


class PlanetoidFormatError(ValueError):
    """Raw file contents do not look like the planetoid distribution."""


@dataclass(frozen=True)
class RawDataset:
    features: np.ndarray  # n x d float64
    labels: np.ndarray    # n int64 (argmax of one-hot rows)
    edges: np.ndarray     # m x 2 int64, canonical u < v, deduplicated
    num_classes: int


def file_names(dataset: str) -> list[str]:
    return [f"ind.{dataset}.{suffix}" for suffix in FILE_SUFFIXES]


def _load_pickle(path: str):
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def _parse_test_index(path: str) -> np.ndarray:
    with open(path) as fh:
        values = [int(line) for line in fh.read().split()]
    if not values:
        raise PlanetoidFormatError(f"{os.path.basename(path)} is empty")
    return np.asarray(values, dtype=np.int64)


def load_raw(dataset: str, directory: str) -> RawDataset:
    """Assemble a full dataset from its eight raw files in `directory`."""
    if dataset not in DATASETS:
        raise PlanetoidFormatError(f"unknown dataset {dataset!r}; expected one of {DATASETS}")
    objects = {}
    for suffix in FILE_SUFFIXES[:-1]:
        objects[suffix] = _load_pickle(os.path.join(directory, f"ind.{dataset}.{suffix}"))
    test_idx = _parse_test_index(os.path.join(directory, f"ind.{dataset}.test.index"))

    allx = np.asarray(sp.csr_matrix(objects["allx"]).todense(), dtype=np.float64)
    tx = np.asarray(sp.csr_matrix(objects["tx"]).todense(), dtype=np.float64)
    ally, ty = np.asarray(objects["ally"]), np.asarray(objects["ty"])
    test_range = np.sort(test_idx)

    if dataset == "citeseer":
        # isolated test nodes are absent from tx/ty; pad the gap with zeros
        full = np.arange(test_range.min(), test_range.max() + 1)
        tx_ext = np.zeros((full.size, allx.shape[1]))
        tx_ext[test_range - test_range.min()] = tx
        tx = tx_ext
        ty_ext = np.zeros((full.size, ally.shape[1]), dtype=ty.dtype)
        ty_ext[test_range - test_range.min()] = ty
        ty = ty_ext

    features = np.vstack((allx, tx))
    features[test_idx] = features[test_range]

    onehot = np.vstack((ally, ty))
    onehot[test_idx] = onehot[test_range]
    labels = np.argmax(onehot, axis=1).astype(np.int64)
    num_classes = int(onehot.shape[1])

    n = features.shape[0]
    graph = objects["graph"]
    pairs = set()
    for node, neighbors in graph.items():
        if not (0 <= int(node) < n):
            raise PlanetoidFormatError(f"graph references node {node} outside [0, {n})")
        for nb in neighbors:
            nb = int(nb)
            if not (0 <= nb < n):
                raise PlanetoidFormatError(f"graph references node {nb} outside [0, {n})")
            if nb == int(node):
                continue  # drop self-citations
            pairs.add((min(int(node), nb), max(int(node), nb)))
    edges = np.asarray(sorted(pairs), dtype=np.int64).reshape(-1, 2)

    return RawDataset(features=features, labels=labels, edges=edges, num_classes=num_classes)
