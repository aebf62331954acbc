"""Pure-numpy fallback for the Fisher accumulation kernel.

Same contract as the compiled module: per-node skinny matrix products
instead of fused C loops. Slower by a small constant factor; selected
automatically when the extension is unavailable.
"""

from __future__ import annotations

import numpy as np

__all__ = ["w0_square_sum"]


def w0_square_sum(
    indptr: np.ndarray,
    indices: np.ndarray,
    pdata: np.ndarray,
    px: np.ndarray,
    relu: np.ndarray,
    wz: np.ndarray,
    subset: np.ndarray,
    out: np.ndarray,
) -> None:
    """Accumulate sum_i (w_i[b] * M_i[a, b])^2 into out (d x h), in place."""
    d, h = px.shape[1], relu.shape[1]
    tmp = np.empty((d, h))
    for si, i in enumerate(subset):
        lo, hi = indptr[i], indptr[i + 1]
        if hi == lo:
            continue
        nbrs = indices[lo:hi]
        coef = pdata[lo:hi]
        scaled = px[nbrs] * coef[:, None]
        np.dot(scaled.T, relu[nbrs], out=tmp)
        tmp *= wz[si]
        np.square(tmp, out=tmp)
        out += tmp
