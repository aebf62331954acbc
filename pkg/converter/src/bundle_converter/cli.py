"""Command-line surface: converter --dataset cora --out ./data/cora --seed 0."""

from __future__ import annotations

import argparse
import json
import sys

from .convert import ConvertJob, convert, convert_from_directory
from .fetch import ChecksumError, DownloadError
from .planetoid import DATASETS, PlanetoidFormatError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="converter",
        description="Export a citation benchmark as a graph-bundle directory.",
    )
    parser.add_argument("--dataset", required=True, choices=DATASETS)
    parser.add_argument("--out", required=True, help="bundle output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--train-fraction", type=float, default=0.9)
    parser.add_argument("--cache-dir", help="raw-file cache (default ~/.cache/graphbundle-converter)")
    parser.add_argument("--mirror", help="base URL of the raw-file mirror")
    parser.add_argument("--checksums", help="JSON manifest of filename -> sha256 to enforce")
    parser.add_argument(
        "--raw-dir", help="use already-downloaded raw files from this directory (offline)"
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    job = ConvertJob(
        dataset_name=args.dataset,
        output_dir=args.out,
        train_fraction=args.train_fraction,
        seed=args.seed,
        cache_dir=args.cache_dir,
        mirror=args.mirror,
        checksum_manifest=args.checksums,
    )
    try:
        if args.raw_dir:
            out = convert_from_directory(job, args.raw_dir)
        else:
            out = convert(job)
    except ChecksumError as exc:
        print(json.dumps({"error": "checksum", "message": str(exc)}), file=sys.stderr)
        return 2
    except DownloadError as exc:
        print(json.dumps({"error": "download", "retriable": True, "message": str(exc)}),
              file=sys.stderr)
        return 3
    except (PlanetoidFormatError, ValueError, OSError) as exc:
        print(json.dumps({"error": "validation", "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps({"out": out, "dataset": args.dataset, "seed": args.seed}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
