#ifndef GSC_FISHER_CORE_H
#define GSC_FISHER_CORE_H

#include <stdlib.h>

#define GSC_MAX_SPECIAL 12

/* Accumulate squared first-layer per-sample gradients over a node subset.
 *
 * indptr/indices/pdata: CSR propagation matrix (n x n); px: P @ X (n x d,
 * row-major); relu: relu'(PXW0) as 0/1 doubles (n x h); wz: per-subset-node
 * class-backprop rows W1 (z_i - y_i) (n_subset x h); out: d x h accumulator.
 * rt_scratch must hold max_degree * h doubles, macc_scratch h doubles.
 * Returns 0 on success, -1 on allocation failure.
 */
int gsc_w0_square_sum(const long long* indptr, const long long* indices,
                      const double* pdata, const double* px,
                      const double* relu, const double* wz,
                      const long long* subset, long n_subset, long d, long h,
                      long max_degree, double* out, double* rt_scratch,
                      double* macc_scratch);

#endif
