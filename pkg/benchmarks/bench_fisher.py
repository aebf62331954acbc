#!/usr/bin/env python3
"""Benchmark the Fisher-diagonal kernels: compiled C core vs numpy fallback.

Runs the per-sample Fisher accumulation over the training set of seeded SBM
graphs at a few sizes and prints a timing table. The two backends compute
the same quantity; the last column reports their maximum relative deviation.

Usage: python benchmarks/bench_fisher.py [--quick]
"""

import argparse
import time

import numpy as np

import graphscrub as gs
from graphscrub.backend import HAVE_COMPILED
from graphscrub.fisher import fisher_diag


CASES = [
    # (nodes, classes, p_in, p_out, feature_dim, hidden)
    (300, 3, 0.12, 0.01, 16, 32),
    (1000, 5, 0.02, 0.002, 128, 64),
    (2708, 7, 0.00808, 0.00034, 1433, 256),
]


def time_backend(p, x, labels, model, subset, backend, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fisher_diag(p, x, labels, model, subset, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="skip the largest case")
    args = parser.parse_args()

    cases = CASES[:-1] if args.quick else CASES
    repeats = 3
    print(f"compiled kernel available: {HAVE_COMPILED}")
    print(f"{'graph':>22} {'|D|':>6} {'params':>8} {'python':>10} {'compiled':>10} "
          f"{'speedup':>8} {'max rel dev':>12}")
    for n, c, p_in, p_out, d, hidden in cases:
        graph = gs.generate_sbm(n, c, p_in, p_out, d, seed=0)
        model = gs.train(graph, gs.TrainConfig(hidden_dim=hidden, epochs=5, seed=0,
                                               store_fisher=False))
        p = graph.propagation_matrix
        subset = graph.train_nodes()
        t_py, f_py = time_backend(p, graph.features, graph.labels, model, subset,
                                  "python", repeats)
        if HAVE_COMPILED:
            t_c, f_c = time_backend(p, graph.features, graph.labels, model, subset,
                                    "compiled", repeats)
            scale = np.maximum(np.abs(f_py.values), 1e-300)
            dev = float(np.max(np.abs(f_py.values - f_c.values) / scale))
            print(f"{f'n={n} d={d} h={hidden}':>22} {subset.size:>6} {model.num_params:>8} "
                  f"{t_py*1000:>8.1f}ms {t_c*1000:>8.1f}ms {t_py/t_c:>7.1f}x {dev:>12.2e}")
        else:
            print(f"{f'n={n} d={d} h={hidden}':>22} {subset.size:>6} {model.num_params:>8} "
                  f"{t_py*1000:>8.1f}ms {'-':>10} {'-':>8} {'-':>12}")


if __name__ == "__main__":
    main()
