"""Selects the Fisher accumulation kernel at import time.

The compiled Cython extension is preferred; the numpy fallback keeps the
package fully functional when the extension was not built.
"""

from __future__ import annotations

from . import _fisher_python

try:
    from . import _fisher_kernel

    HAVE_COMPILED = True
except ImportError:  # extension not built on this platform
    _fisher_kernel = None
    HAVE_COMPILED = False

__all__ = ["HAVE_COMPILED", "default_backend", "get_w0_square_sum"]


def default_backend() -> str:
    return "compiled" if HAVE_COMPILED else "python"


def get_w0_square_sum(backend: str = "auto"):
    """Resolve the kernel implementation for a backend name."""
    if backend == "auto":
        backend = default_backend()
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled fisher kernel is not available in this build")
        return _fisher_kernel.w0_square_sum
    if backend == "python":
        return _fisher_python.w0_square_sum
    raise ValueError(f"unknown backend {backend!r}; expected auto|compiled|python")
