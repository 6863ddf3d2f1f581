#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the three hot kernels on realistic shapes: the per-round weight
update (dominates forecaster runtime), weighted log-sum-exp, and one
layer of the segmented-optimum recursion.  Run after building the
extension:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from shiftopt import _kernels_py

try:
    from shiftopt import _kernels
except ImportError:
    _kernels = None


def time_call(fn, *args, repeat=2000):
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best


def bench_share_step(mod, n):
    rng = np.random.default_rng(0)
    lv = rng.uniform(-5, 5, n)
    lam_u = rng.uniform(0, 1, n)
    logw = np.log(np.diff(np.concatenate(
        [[0.0], np.sort(rng.uniform(0.01, 0.99, n - 1)), [1.0]])))
    return time_call(lambda: mod.share_step(lv, lam_u, logw, 0.01))


def bench_logsumexp(mod, n):
    rng = np.random.default_rng(1)
    x = rng.uniform(-5, 5, n)
    w = rng.uniform(-5, 0, n)
    return time_call(lambda: mod.logsumexp_weighted(x, w))


def bench_dp_layer(mod, T, P):
    rng = np.random.default_rng(2)
    cum = np.zeros((T + 1, P))
    np.cumsum(rng.uniform(0, 1, (T, P)), axis=0, out=cum[1:])
    prev = np.full(T + 1, -np.inf)
    prev[0] = 0.0
    return time_call(lambda: mod.dp_max_layer(prev, cum), repeat=50)


def main():
    if _kernels is None:
        print("compiled extension not available; showing numpy only")
    rows = []
    for n in (16, 128, 512):
        rows.append((f"share_step        n={n:4d}", bench_share_step(_kernels_py, n),
                     bench_share_step(_kernels, n) if _kernels else None))
        rows.append((f"logsumexp         n={n:4d}", bench_logsumexp(_kernels_py, n),
                     bench_logsumexp(_kernels, n) if _kernels else None))
    for T, P in ((256, 64), (2048, 256)):
        rows.append((f"dp_max_layer T={T:4d} P={P:3d}",
                     bench_dp_layer(_kernels_py, T, P),
                     bench_dp_layer(_kernels, T, P) if _kernels else None))
    print(f"{'kernel':32s} {'numpy':>12s} {'cython':>12s} {'speedup':>8s}")
    for name, t_py, t_cy in rows:
        if t_cy is None:
            print(f"{name:32s} {t_py * 1e6:10.2f}us {'-':>12s} {'-':>8s}")
        else:
            print(f"{name:32s} {t_py * 1e6:10.2f}us {t_cy * 1e6:10.2f}us "
                  f"{t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
