/* Per-node Fisher accumulation: exact-degree specialized inner loops.
 *
 * For node i with propagation row (u_t, c_t), the first-layer per-sample
 * gradient is G[a][b] = w[b] * sum_t c_t * PX[u_t][a] * R[u_t][b]. The class
 * weight w distributes over the sum, so each node's relu rows are gathered
 * once as Rt = R * w into contiguous scratch and the inner loop accumulates
 * (sum_t c_t * PX[u_t][a] * Rt[t][b])^2 straight into the d x h output.
 * Degrees 1..12 get straight-line code; larger degrees use a buffered
 * generic path.
 */

#include "_fisher_core.h"

#include <string.h>

#define NODE_FN(K, DECLS, CTS, MSUM)                                          \
    static void node_k##K(const double* coef, const double* const* xps,       \
                          const double* rt, double* restrict out, long d,     \
                          long h) {                                           \
        DECLS;                                                                \
        for (long a = 0; a < d; ++a) {                                        \
            CTS;                                                              \
            double* restrict o = out + a * h;                                 \
            for (long b = 0; b < h; ++b) {                                    \
                const double m = MSUM;                                        \
                o[b] += m * m;                                                \
            }                                                                 \
        }                                                                     \
    }

#define D1 const double* restrict x0 = xps[0]; const double* restrict r0 = rt
#define D2 D1; const double* restrict x1 = xps[1]; const double* restrict r1 = rt + h
#define D3 D2; const double* restrict x2 = xps[2]; const double* restrict r2 = rt + 2 * h
#define D4 D3; const double* restrict x3 = xps[3]; const double* restrict r3 = rt + 3 * h
#define D5 D4; const double* restrict x4 = xps[4]; const double* restrict r4 = rt + 4 * h
#define D6 D5; const double* restrict x5 = xps[5]; const double* restrict r5 = rt + 5 * h
#define D7 D6; const double* restrict x6 = xps[6]; const double* restrict r6 = rt + 6 * h
#define D8 D7; const double* restrict x7 = xps[7]; const double* restrict r7 = rt + 7 * h
#define D9 D8; const double* restrict x8 = xps[8]; const double* restrict r8 = rt + 8 * h
#define D10 D9; const double* restrict x9 = xps[9]; const double* restrict r9 = rt + 9 * h
#define D11 D10; const double* restrict x10 = xps[10]; const double* restrict r10 = rt + 10 * h
#define D12 D11; const double* restrict x11 = xps[11]; const double* restrict r11 = rt + 11 * h

#define C1 const double c0 = coef[0] * x0[a]
#define C2 C1; const double c1 = coef[1] * x1[a]
#define C3 C2; const double c2 = coef[2] * x2[a]
#define C4 C3; const double c3 = coef[3] * x3[a]
#define C5 C4; const double c4 = coef[4] * x4[a]
#define C6 C5; const double c5 = coef[5] * x5[a]
#define C7 C6; const double c6 = coef[6] * x6[a]
#define C8 C7; const double c7 = coef[7] * x7[a]
#define C9 C8; const double c8 = coef[8] * x8[a]
#define C10 C9; const double c9 = coef[9] * x9[a]
#define C11 C10; const double c10 = coef[10] * x10[a]
#define C12 C11; const double c11 = coef[11] * x11[a]

#define SUM4 ((c0 * r0[b] + c1 * r1[b]) + (c2 * r2[b] + c3 * r3[b]))
#define SUM8 (SUM4 + ((c4 * r4[b] + c5 * r5[b]) + (c6 * r6[b] + c7 * r7[b])))

NODE_FN(1, D1, C1, c0 * r0[b])
NODE_FN(2, D2, C2, c0 * r0[b] + c1 * r1[b])
NODE_FN(3, D3, C3, (c0 * r0[b] + c1 * r1[b]) + c2 * r2[b])
NODE_FN(4, D4, C4, SUM4)
NODE_FN(5, D5, C5, SUM4 + c4 * r4[b])
NODE_FN(6, D6, C6, SUM4 + (c4 * r4[b] + c5 * r5[b]))
NODE_FN(7, D7, C7, SUM4 + ((c4 * r4[b] + c5 * r5[b]) + c6 * r6[b]))
NODE_FN(8, D8, C8, SUM8)
NODE_FN(9, D9, C9, SUM8 + c8 * r8[b])
NODE_FN(10, D10, C10, SUM8 + (c8 * r8[b] + c9 * r9[b]))
NODE_FN(11, D11, C11, SUM8 + ((c8 * r8[b] + c9 * r9[b]) + c10 * r10[b]))
NODE_FN(12, D12, C12,
        SUM8 + ((c8 * r8[b] + c9 * r9[b]) + (c10 * r10[b] + c11 * r11[b])))

/* Generic path for hub nodes: running accumulator over neighbor rows. */
static void node_generic(const double* coef, const double* const* xps,
                         const double* rt, double* restrict out, long d,
                         long h, long k, double* restrict macc) {
    for (long a = 0; a < d; ++a) {
        const double c0 = coef[0] * xps[0][a];
        for (long b = 0; b < h; ++b) {
            macc[b] = c0 * rt[b];
        }
        for (long t = 1; t < k; ++t) {
            const double ct = coef[t] * xps[t][a];
            const double* restrict rrow = rt + t * h;
            for (long b = 0; b < h; ++b) {
                macc[b] += ct * rrow[b];
            }
        }
        double* restrict o = out + a * h;
        for (long b = 0; b < h; ++b) {
            o[b] += macc[b] * macc[b];
        }
    }
}

int gsc_w0_square_sum(const long long* indptr, const long long* indices,
                      const double* pdata, const double* px,
                      const double* relu, const double* wz,
                      const long long* subset, long n_subset, long d, long h,
                      long max_degree, double* out, double* rt_scratch,
                      double* macc_scratch) {
    const double* xps_small[GSC_MAX_SPECIAL];
    const double** xpg = 0;

    if (max_degree > GSC_MAX_SPECIAL) {
        xpg = (const double**)malloc((size_t)max_degree * sizeof(double*));
        if (!xpg) {
            return -1;
        }
    }

    for (long si = 0; si < n_subset; ++si) {
        const long long i = subset[si];
        const long long start = indptr[i];
        const long k = (long)(indptr[i + 1] - start);
        if (k == 0) {
            continue;
        }
        const double* coef = pdata + start;
        const double* wrow = wz + (size_t)si * (size_t)h;
        const double** xp = (k <= GSC_MAX_SPECIAL) ? xps_small : xpg;
        for (long t = 0; t < k; ++t) {
            const long long u = indices[start + t];
            xp[t] = px + (size_t)u * (size_t)d;
            const double* rrow = relu + (size_t)u * (size_t)h;
            double* rdst = rt_scratch + (size_t)t * (size_t)h;
            for (long b = 0; b < h; ++b) {
                rdst[b] = rrow[b] * wrow[b];
            }
        }
        switch (k) {
            case 1: node_k1(coef, xp, rt_scratch, out, d, h); break;
            case 2: node_k2(coef, xp, rt_scratch, out, d, h); break;
            case 3: node_k3(coef, xp, rt_scratch, out, d, h); break;
            case 4: node_k4(coef, xp, rt_scratch, out, d, h); break;
            case 5: node_k5(coef, xp, rt_scratch, out, d, h); break;
            case 6: node_k6(coef, xp, rt_scratch, out, d, h); break;
            case 7: node_k7(coef, xp, rt_scratch, out, d, h); break;
            case 8: node_k8(coef, xp, rt_scratch, out, d, h); break;
            case 9: node_k9(coef, xp, rt_scratch, out, d, h); break;
            case 10: node_k10(coef, xp, rt_scratch, out, d, h); break;
            case 11: node_k11(coef, xp, rt_scratch, out, d, h); break;
            case 12: node_k12(coef, xp, rt_scratch, out, d, h); break;
            default:
                node_generic(coef, xp, rt_scratch, out, d, h, k, macc_scratch);
        }
    }

    free((void*)xpg);
    return 0;
}
