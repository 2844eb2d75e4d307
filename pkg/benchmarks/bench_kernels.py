#!/usr/bin/env python3
"""Side-by-side benchmark: numba kernels vs the numpy/python fallback.

The fallback is the same code path selected by BEVPLAN_NO_NUMBA=1; here we
flip the switch in-process so one run prints both columns. JIT compilation
happens during warmup and is excluded from the timings.
"""

import time

import numpy as np

from bevplan import kernels


def time_call(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_astar(rng, size, density=0.3, searches=50):
    occ = (rng.random((size, size)) < density).astype(np.uint8)
    free = np.argwhere(occ == 0)
    pairs = [
        (tuple(free[rng.integers(len(free))]), tuple(free[rng.integers(len(free))]))
        for _ in range(searches)
    ]

    def run():
        for (sr, sc), (gr, gc) in pairs:
            kernels.astar_raw(occ, sr, sc, gr, gc)

    return run


def bench_nearest(rng, size):
    cells = np.full((size, size), -1, dtype=np.int64)
    u = rng.random((size, size))
    cells[u < 0.2] = rng.integers(1, 8, (size, size))[u < 0.2]
    cells[(u >= 0.2) & (u < 0.5)] = -2
    kr, kc = np.nonzero(cells >= 0)
    kcls = cells[kr, kc]
    mr, mc = np.nonzero(cells == -2)

    def run():
        kernels.nearest_fill_raw(kr, kc, kcls, mr, mc)

    return run


def bench_majority(rng, size):
    cells = np.full((size, size), -1, dtype=np.int64)
    cells[0, :] = 1
    cells[-1, :] = 2
    cells[:, 0] = 1
    cells[:, -1] = 2
    cells[1:-1, 1:-1] = -2

    def run():
        kernels.majority_fill_raw(cells, 1.0, 2 * size)

    return run


def main():
    if not kernels.HAVE_NUMBA:
        print("numba not available; only the fallback column is meaningful")
    rng = np.random.default_rng(0)
    cases = [
        ("astar 50x (60x60)", bench_astar(rng, 60)),
        ("astar 50x (175x145-ish)", bench_astar(rng, 160)),
        ("nearest fill (80x80)", bench_nearest(rng, 80)),
        ("majority fill (120x120)", bench_majority(rng, 120)),
    ]

    print("warming up jit...")
    kernels.USE_NUMBA = kernels.HAVE_NUMBA
    for _, fn in cases:
        fn()

    print(f"{'kernel':<26}{'fallback (s)':>14}{'numba (s)':>12}{'speedup':>9}")
    print("-" * 61)
    for name, fn in cases:
        kernels.USE_NUMBA = False
        t_py = time_call(fn)
        kernels.USE_NUMBA = kernels.HAVE_NUMBA
        t_nb = time_call(fn)
        speedup = t_py / t_nb if t_nb > 0 else float("inf")
        print(f"{name:<26}{t_py:>14.4f}{t_nb:>12.4f}{speedup:>8.1f}x")


if __name__ == "__main__":
    main()
