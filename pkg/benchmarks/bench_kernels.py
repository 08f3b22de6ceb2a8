"""Benchmark the jitted hot kernels against their pure-numpy fallbacks.

The active path is selected by the TBSIM_NO_NUMBA environment variable at
import time, so this script runs each kernel through both entry points
directly: the `_py` originals and the module-level (possibly jitted) names.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from tbsim import kernels
from tbsim.rng import CounterRng


def _timeit(fn, args, repeats):
    fn(*args)  # warm-up (includes JIT compilation where applicable)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = CounterRng(0xBE9C)
    n = 2_000_000
    uniforms = rng.uniform(n)
    starts = np.sort(rng.uniform(200_000) * 1e9)
    stops = np.sort(rng.uniform(200_000) * 1e9)
    times = np.sort(rng.uniform(n) * 1e10)

    cases = [
        ("telegraph", kernels.telegraph, kernels.telegraph_py,
         (uniforms, 0.005, 0.008333, True)),
        ("pair_delay_counts", kernels.pair_delay_counts, kernels.pair_delay_counts_py,
         (starts, stops, -250_250.0, 500.0, 1001)),
        ("dead_time_mask", kernels.dead_time_mask, kernels.dead_time_mask_py,
         (times, 50_000.0)),
    ]

    print(f"numba active: {kernels.USE_NUMBA}")
    print(f"{'kernel':<20} {'active path':>12} {'pure python':>12} {'speedup':>8}")
    for name, active, fallback, case_args in cases:
        t_active = _timeit(active, case_args, args.repeats)
        t_py = _timeit(fallback, case_args, args.repeats)
        print(f"{name:<20} {t_active * 1e3:>10.2f}ms {t_py * 1e3:>10.2f}ms "
              f"{t_py / t_active:>7.1f}x")


if __name__ == "__main__":
    main()
