"""Graph-bundle directory format: loaders, savers, and validation.

A bundle directory holds meta.json, edges.tsv (one "u\\tv" line per
undirected edge, u < v), features.csv (one comma-separated float row per
node, 17 significant digits), labels.csv, and splits.csv (train/test
tokens). Plain text keeps the format diffable and trivially writable by
external converters; floats round-trip float64 exactly.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from .graph import GraphBundle

__all__ = ["BundleManifest", "BundleValidationError", "load_bundle", "save_bundle"]

FORMAT_VERSION = 1


@dataclass(frozen=True)
class BundleManifest:
    num_nodes: int
    num_edges: int
    feature_dim: int
    num_classes: int
    name: str
    format_version: int = FORMAT_VERSION


class BundleValidationError(ValueError):
    """Malformed bundle content, pinned to a file (and line where sensible)."""

    def __init__(self, file: str, line: int | None, message: str):
        self.file = file
        self.line = line
        where = f"{file}:{line}" if line is not None else file
        super().__init__(f"{where}: {message}")


def _read_lines(path: str, fname: str) -> list[str]:
    try:
        with open(path) as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise BundleValidationError(fname, None, f"cannot read: {exc}") from exc


def load_bundle(directory: str) -> GraphBundle:
    """Load and fully validate a bundle directory."""
    meta_path = os.path.join(directory, "meta.json")
    try:
        with open(meta_path) as fh:
            meta_raw = json.load(fh)
    except OSError as exc:
        raise BundleValidationError("meta.json", None, f"cannot read: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BundleValidationError("meta.json", exc.lineno, f"invalid JSON: {exc.msg}") from exc

    required = ("num_nodes", "num_edges", "feature_dim", "num_classes", "name", "format_version")
    for key in required:
        if key not in meta_raw:
            raise BundleValidationError("meta.json", None, f"missing key {key!r}")
    manifest = BundleManifest(
        num_nodes=int(meta_raw["num_nodes"]),
        num_edges=int(meta_raw["num_edges"]),
        feature_dim=int(meta_raw["feature_dim"]),
        num_classes=int(meta_raw["num_classes"]),
        name=str(meta_raw["name"]),
        format_version=int(meta_raw["format_version"]),
    )
    if manifest.format_version != FORMAT_VERSION:
        raise BundleValidationError(
            "meta.json", None, f"unsupported format_version {manifest.format_version}"
        )
    n = manifest.num_nodes

    edge_lines = _read_lines(os.path.join(directory, "edges.tsv"), "edges.tsv")
    edge_lines = [ln for ln in edge_lines if ln != ""]
    edges = np.empty((len(edge_lines), 2), dtype=np.int64)
    seen: set[tuple[int, int]] = set()
    for lineno, line in enumerate(edge_lines, start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise BundleValidationError("edges.tsv", lineno, "expected two tab-separated ids")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise BundleValidationError("edges.tsv", lineno, f"unparseable edge {line!r}") from None
        if u == v:
            raise BundleValidationError("edges.tsv", lineno, f"self-loop on node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise BundleValidationError("edges.tsv", lineno, f"edge ({u}, {v}) out of range")
        if u > v:
            raise BundleValidationError("edges.tsv", lineno, f"edge ({u}, {v}) must satisfy u < v")
        if (u, v) in seen:
            raise BundleValidationError("edges.tsv", lineno, f"duplicate edge ({u}, {v})")
        seen.add((u, v))
        edges[lineno - 1] = (u, v)
    if len(edge_lines) != manifest.num_edges:
        raise BundleValidationError(
            "edges.tsv",
            None,
            f"edge count {len(edge_lines)} does not match manifest num_edges {manifest.num_edges}",
        )

    feat_path = os.path.join(directory, "features.csv")
    try:
        features = np.loadtxt(feat_path, delimiter=",", dtype=np.float64, ndmin=2)
    except OSError as exc:
        raise BundleValidationError("features.csv", None, f"cannot read: {exc}") from exc
    except ValueError:
        _locate_bad_float(feat_path)  # raises with the exact line
        raise
    if features.shape[0] != n:
        raise BundleValidationError(
            "features.csv", None, f"expected {n} rows, found {features.shape[0]}"
        )
    if features.shape[1] != manifest.feature_dim:
        raise BundleValidationError(
            "features.csv",
            None,
            f"expected {manifest.feature_dim} columns, found {features.shape[1]}",
        )

    label_lines = _read_lines(os.path.join(directory, "labels.csv"), "labels.csv")
    label_lines = [ln for ln in label_lines if ln != ""]
    if len(label_lines) != n:
        raise BundleValidationError(
            "labels.csv", None, f"expected {n} labels, found {len(label_lines)}"
        )
    labels = np.empty(n, dtype=np.int64)
    for lineno, line in enumerate(label_lines, start=1):
        try:
            value = int(line)
        except ValueError:
            raise BundleValidationError(
                "labels.csv", lineno, f"unparseable label {line!r}"
            ) from None
        if not (0 <= value < manifest.num_classes):
            raise BundleValidationError(
                "labels.csv",
                lineno,
                f"label {value} outside [0, {manifest.num_classes})",
            )
        labels[lineno - 1] = value

    split_lines = _read_lines(os.path.join(directory, "splits.csv"), "splits.csv")
    split_lines = [ln for ln in split_lines if ln != ""]
    if len(split_lines) != n:
        raise BundleValidationError(
            "splits.csv", None, f"expected {n} split tokens, found {len(split_lines)}"
        )
    train_mask = np.zeros(n, dtype=bool)
    for lineno, token in enumerate(split_lines, start=1):
        if token == "train":
            train_mask[lineno - 1] = True
        elif token != "test":
            raise BundleValidationError(
                "splits.csv", lineno, f"unknown split token {token!r} (expected train/test)"
            )

    return GraphBundle.from_edges(
        num_nodes=n,
        edges=edges,
        features=features,
        labels=labels,
        train_mask=train_mask,
        test_mask=~train_mask,
        num_classes=manifest.num_classes,
        name=manifest.name,
    )


def _locate_bad_float(path: str) -> None:
    fname = os.path.basename(path)
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            for cell in line.rstrip("\n").split(","):
                try:
                    float(cell)
                except ValueError:
                    raise BundleValidationError(
                        fname, lineno, f"unparseable float {cell!r}"
                    ) from None
    raise BundleValidationError(fname, None, "malformed float table")


def _atomic_write(directory: str, fname: str, content: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, os.path.join(directory, fname))
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(f"writing {os.path.join(directory, fname)}: {exc}") from exc


def save_bundle(graph: GraphBundle, directory: str) -> None:
    """Write the bundle directory (canonical ordering, atomic per-file)."""
    os.makedirs(directory, exist_ok=True)
    manifest = BundleManifest(
        num_nodes=graph.num_nodes,
        num_edges=graph.num_edges,
        feature_dim=graph.feature_dim,
        num_classes=graph.num_classes,
        name=graph.name,
    )
    _atomic_write(directory, "meta.json", json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")

    edges = graph.edge_list()
    _atomic_write(
        directory, "edges.tsv", "".join(f"{u}\t{v}\n" for u, v in edges.tolist())
    )
    _atomic_write(
        directory,
        "features.csv",
        "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in graph.features),
    )
    _atomic_write(directory, "labels.csv", "".join(f"{v}\n" for v in graph.labels.tolist()))
    _atomic_write(
        directory,
        "splits.csv",
        "".join("train\n" if t else "test\n" for t in graph.train_mask.tolist()),
    )
