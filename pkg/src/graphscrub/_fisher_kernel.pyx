# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled Fisher accumulation kernel (thin wrapper over the C core)."""

import numpy as np


cdef extern from "_fisher_core.h":
    int gsc_w0_square_sum(const long long* indptr, const long long* indices,
                          const double* pdata, const double* px,
                          const double* relu, const double* wz,
                          const long long* subset, long n_subset, long d,
                          long h, long max_degree, double* out,
                          double* w2_scratch, double* macc_scratch) nogil


def w0_square_sum(
    const long long[::1] indptr,
    const long long[::1] indices,
    const double[::1] pdata,
    const double[:, ::1] px,
    const double[:, ::1] relu,
    const double[:, ::1] wz,
    const long long[::1] subset,
    double[:, ::1] out,
):
    """Accumulate sum_i (w_i[b] * M_i[a, b])^2 into out (d x h), in place."""
    cdef long d = px.shape[1]
    cdef long h = relu.shape[1]
    cdef long s = subset.shape[0]
    cdef long max_k = 0, k
    cdef long si
    if s == 0:
        return None
    for si in range(s):
        k = indptr[subset[si] + 1] - indptr[subset[si]]
        if k > max_k:
            max_k = k
    if max_k == 0:
        return None

    rt_scratch = np.empty(max_k * h, dtype=np.float64)
    macc_scratch = np.empty(h, dtype=np.float64)
    cdef double[::1] rtv = rt_scratch
    cdef double[::1] mav = macc_scratch
    cdef int rc
    with nogil:
        rc = gsc_w0_square_sum(
            &indptr[0], &indices[0], &pdata[0], &px[0, 0], &relu[0, 0],
            &wz[0, 0] if wz.shape[0] else NULL,
            &subset[0], s, d, h, max_k, &out[0, 0], &rtv[0], &mav[0],
        )
    if rc != 0:
        raise MemoryError("fisher kernel scratch allocation failed")
    return None
