"""Downloading and caching of the raw dataset files.

Files are fetched from the canonical planetoid distribution (or any mirror
via --mirror / GRAPHBUNDLE_DATA_MIRROR) into a local cache. Integrity is
checked against a user-supplied manifest of sha256 digests; a mismatch is a
hard error, while network failures raise a retriable error after bounded
retries. Observed digests are always reported so a manifest can be pinned
from a trusted first download.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
import urllib.error
import urllib.request

from .planetoid import file_names

DEFAULT_MIRROR = "https://github.com/kimiyoung/planetoid/raw/master/data"
DEFAULT_CACHE = os.path.join(os.path.expanduser("~"), ".cache", "graphbundle-converter")
_RETRIES = 3


class DownloadError(RuntimeError):
    """Network-level failure; safe to retry later."""

    retriable = True


class ChecksumError(RuntimeError):
    """Cached or downloaded content does not match the pinned digest."""

    retriable = False


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_manifest(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    with open(path) as fh:
        manifest = json.load(fh)
    if not isinstance(manifest, dict):
        raise ChecksumError("checksum manifest must be a JSON object of filename -> sha256")
    return {str(k): str(v).lower() for k, v in manifest.items()}


def _download(url: str, dest: str) -> None:
    last: Exception | None = None
    for attempt in range(_RETRIES):
        try:
            with urllib.request.urlopen(url, timeout=60) as resp:
                payload = resp.read()
            tmp = dest + ".part"
            with open(tmp, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, dest)
            return
        except (urllib.error.URLError, OSError) as exc:
            last = exc
            time.sleep(1.0 + attempt)
    raise DownloadError(f"failed to download {url} after {_RETRIES} attempts: {last}")


def fetch_dataset(
    dataset: str,
    cache_dir: str | None = None,
    mirror: str | None = None,
    checksums: dict[str, str] | None = None,
) -> str:
    """Ensure all raw files for a dataset exist locally; return their directory."""
    cache_dir = cache_dir or os.environ.get("GRAPHBUNDLE_CACHE", DEFAULT_CACHE)
    mirror = mirror or os.environ.get("GRAPHBUNDLE_DATA_MIRROR", DEFAULT_MIRROR)
    checksums = checksums or {}
    target = os.path.join(cache_dir, dataset)
    os.makedirs(target, exist_ok=True)

    observed = {}
    for fname in file_names(dataset):
        path = os.path.join(target, fname)
        if not os.path.exists(path):
            _download(f"{mirror.rstrip('/')}/{fname}", path)
        digest = sha256_of(path)
        observed[fname] = digest
        expected = checksums.get(fname)
        if expected is not None and digest != expected:
            raise ChecksumError(
                f"{fname}: sha256 {digest} does not match pinned {expected}"
            )
    print(json.dumps({"cache": target, "sha256": observed}), file=sys.stderr)
    return target
