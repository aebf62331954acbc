"""Conversion jobs: raw citation dataset -> graph-bundle directory.

The bundle directory format is the contract with the unlearning toolkit:
meta.json, edges.tsv (u < v, one line per undirected edge), features.csv
(17-significant-digit floats), labels.csv, splits.csv. The split is a
seeded uniform 90/10 draw (the benchmarks' convention), recorded in
meta.json alongside the seed.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .fetch import fetch_dataset, load_manifest
from .planetoid import DATASETS, RawDataset, load_raw

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ConvertJob:
    dataset_name: str
    output_dir: str
    train_fraction: float = 0.9
    seed: int = 0
    cache_dir: str | None = None
    mirror: str | None = None
    checksum_manifest: str | None = None

    def validate(self) -> None:
        if self.dataset_name not in DATASETS:
            raise ValueError(f"dataset must be one of {DATASETS}, got {self.dataset_name!r}")
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie in (0, 1)")


def _atomic_write(directory: str, fname: str, content: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".part")
    with os.fdopen(fd, "w") as fh:
        fh.write(content)
    os.replace(tmp, os.path.join(directory, fname))


def write_bundle(
    raw: RawDataset,
    output_dir: str,
    name: str,
    train_mask: np.ndarray,
    split_seed: int,
    train_fraction: float,
) -> None:
    """Emit a bundle directory in the canonical on-disk format."""
    os.makedirs(output_dir, exist_ok=True)
    n, d = raw.features.shape
    meta = {
        "num_nodes": int(n),
        "num_edges": int(raw.edges.shape[0]),
        "feature_dim": int(d),
        "num_classes": int(raw.num_classes),
        "name": name,
        "format_version": FORMAT_VERSION,
        "split_seed": int(split_seed),
        "train_fraction": float(train_fraction),
    }
    _atomic_write(output_dir, "meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    _atomic_write(
        output_dir, "edges.tsv", "".join(f"{u}\t{v}\n" for u, v in raw.edges.tolist())
    )
    _atomic_write(
        output_dir,
        "features.csv",
        "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in raw.features),
    )
    _atomic_write(output_dir, "labels.csv", "".join(f"{v}\n" for v in raw.labels.tolist()))
    _atomic_write(
        output_dir,
        "splits.csv",
        "".join("train\n" if t else "test\n" for t in train_mask.tolist()),
    )


def make_split(num_nodes: int, train_fraction: float, seed: int) -> np.ndarray:
    """Seeded uniform split; realizes floor(train_fraction * n) training nodes."""
    rng = np.random.default_rng(seed)
    n_train = int(train_fraction * num_nodes)
    mask = np.zeros(num_nodes, dtype=bool)
    mask[rng.permutation(num_nodes)[:n_train]] = True
    return mask


def convert(job: ConvertJob) -> str:
    """Fetch (or reuse cached) raw files and export the bundle directory."""
    job.validate()
    manifest = load_manifest(job.checksum_manifest)
    raw_dir = fetch_dataset(
        job.dataset_name, cache_dir=job.cache_dir, mirror=job.mirror, checksums=manifest
    )
    return convert_from_directory(job, raw_dir)


def convert_from_directory(job: ConvertJob, raw_dir: str) -> str:
    """Convert already-downloaded raw files (no network)."""
    job.validate()
    raw = load_raw(job.dataset_name, raw_dir)
    mask = make_split(raw.features.shape[0], job.train_fraction, job.seed)
    write_bundle(
        raw,
        job.output_dir,
        name=job.dataset_name,
        train_mask=mask,
        split_seed=job.seed,
        train_fraction=job.train_fraction,
    )
    return job.output_dir
