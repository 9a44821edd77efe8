#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run after installing the package:

    python3 benchmarks/bench_kernels.py

Sizes mirror the heaviest real workloads: the chance-baseline protocol
(10k queries x 2000-candidate pools) and batch frame aggregation.
"""

from __future__ import annotations

import time

import numpy as np

from viml import kernels
from viml.evaluation import PoolSpec, build_pool


def timeit(fn, *args, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_window_mean() -> None:
    rng = np.random.default_rng(0)
    frames = rng.normal(size=(18_000, 512))  # ~50 minutes of video at 6 fps
    window = 60
    print("\nwindow_mean: 18000x512 frames, 60-frame windows")
    t_np = timeit(kernels.window_mean_numpy, frames, window)
    print(f"  numpy  {t_np * 1e3:9.2f} ms")
    if kernels.NUMBA_ENABLED:
        kernels.window_mean_numba(frames[:100], window)  # compile
        t_nb = timeit(kernels.window_mean_numba, frames, window)
        print(f"  numba  {t_nb * 1e3:9.2f} ms   ({t_np / t_nb:5.2f}x)")


def bench_pool_ranks() -> None:
    rng = np.random.default_rng(1)
    num_queries, pool_size, dim = 10_000, 2000, 16
    queries = rng.normal(size=(num_queries, dim))
    items = rng.normal(size=(num_queries, dim))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    items /= np.linalg.norm(items, axis=1, keepdims=True)
    spec = PoolSpec(pool_size=pool_size, seed=0)
    pools = np.stack([build_pool(i, num_queries, spec) for i in range(num_queries)])
    print(f"\npool_ranks: {num_queries} queries x {pool_size}-candidate pools, d={dim}")
    t_np = timeit(kernels.pool_ranks_numpy, queries, items, pools, repeats=2)
    print(f"  numpy  {t_np * 1e3:9.2f} ms")
    if kernels.NUMBA_ENABLED:
        kernels.pool_ranks_numba(queries[:8], items, pools[:8])  # compile
        t_nb = timeit(kernels.pool_ranks_numba, queries, items, pools, repeats=2)
        print(f"  numba  {t_nb * 1e3:9.2f} ms   ({t_np / t_nb:5.2f}x)")
        agree = np.array_equal(
            kernels.pool_ranks_numba(queries[:64], items, pools[:64]),
            kernels.pool_ranks_numpy(queries[:64], items, pools[:64]),
        )
        print(f"  paths agree on ranks: {agree}")


def bench_rank_of_scores() -> None:
    rng = np.random.default_rng(2)
    scores = rng.normal(size=2000)
    print("\nrank_of_scores: single 2000-candidate pool, 20k calls")

    def many(fn):
        for _ in range(20_000):
            fn(scores, 137)

    t_np = timeit(many, kernels.rank_of_scores_numpy, repeats=2)
    print(f"  numpy  {t_np * 1e3:9.2f} ms")
    if kernels.NUMBA_ENABLED:
        kernels.rank_of_scores_numba(scores, 0)  # compile
        t_nb = timeit(many, kernels.rank_of_scores_numba, repeats=2)
        print(f"  numba  {t_nb * 1e3:9.2f} ms   ({t_np / t_nb:5.2f}x)")


def main() -> None:
    print(f"numba available and enabled: {kernels.NUMBA_ENABLED}")
    if not kernels.NUMBA_ENABLED:
        print("set VIML_NUMBA=1 (and install numba) to benchmark the JIT path")
    bench_window_mean()
    bench_pool_ranks()
    bench_rank_of_scores()


if __name__ == "__main__":
    main()
