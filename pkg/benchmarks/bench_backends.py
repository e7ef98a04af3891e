#!/usr/bin/env python3
"""Benchmark the compiled coordinate-update kernels against the numpy fallback.

Times the multi-iteration runners for both coordinate algorithms across a few
network/dimension sizes and prints per-iteration timings plus speedups.

Usage: python benchmarks/bench_backends.py [--iters 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from coordtrack import backend, graph, selection, signals


def bench_once(impl, algorithm, A_T, R, idx):
    K, N = R.shape[1], R.shape[2]
    W = R[0].copy()
    V = R[0].copy()
    P = np.ones((K, N))
    start = time.perf_counter()
    if algorithm == "sync_coord":
        impl.run_sync_coord(A_T, W, V, R, idx[:, 0])
    else:
        impl.run_indep_coord(A_T, W, V, P, R, idx)
    return time.perf_counter() - start


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iters", type=int, default=20000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not backend.HAS_COMPILED:
        raise SystemExit("compiled backend is not built; nothing to compare")

    cases = [(10, 20), (25, 100), (50, 200)]
    print(f"{args.iters} iterations per case, best of {args.repeat} repeats\n")
    header = f"{'case':>12} {'algorithm':>12} {'python':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for K, N in cases:
        topo = graph.build_connected_geometric(K, 0.6, seed=1)
        A_T = np.ascontiguousarray(graph.metropolis_weights(topo).T)
        model = signals.DecayingSinusoidRamp(K, N, seed=2)
        R = np.stack([model.sample_all(i) for i in range(args.iters)])
        for algorithm, mode in (("sync_coord", selection.SHARED),
                                ("indep_coord", selection.INDEPENDENT)):
            idx = selection.draw_matrix(0, 1, args.iters, K, N, mode)
            times = {}
            for name in ("python", "compiled"):
                impl = backend.get_backend(name)
                times[name] = min(bench_once(impl, algorithm, A_T, R, idx)
                                  for _ in range(args.repeat))
            per_it = {k: v / args.iters * 1e6 for k, v in times.items()}
            print(f"{f'K={K} N={N}':>12} {algorithm:>12} "
                  f"{per_it['python']:>10.2f}us {per_it['compiled']:>10.2f}us "
                  f"{times['python'] / times['compiled']:>8.1f}x")


if __name__ == "__main__":
    main()
