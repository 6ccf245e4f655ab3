"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is warmed up once (JIT compile) before timing, and the two
backends are checked for identical output on the same inputs.
"""

import argparse
import sys
import time

import numpy as np

from outbreakbench import _accel, kernels
from outbreakbench.forecasters import QUANTILE_LEVELS
from outbreakbench.scoring import INTERVAL_ALPHAS, LOWER_IDX, MEDIAN_INDEX, UPPER_IDX


def cases(rng):
    series = rng.poisson(50, 2000).astype(float)
    y = rng.poisson(30, 40).astype(float)
    n_grid = 25 * 13 * 5
    alpha = rng.uniform(0.02, 0.98, n_grid)
    beta = alpha * rng.uniform(0, 1, n_grid)
    phi = rng.uniform(0.8, 0.98, n_grid)
    q = np.sort(rng.uniform(0, 100, (20_000, len(QUANTILE_LEVELS))), axis=1)
    obs = rng.uniform(0, 100, 20_000)
    return {
        "smooth_reflect (n=2000, sigma=2)": lambda: kernels.smooth_reflect(series, kernels.gaussian_weights(2.0)),
        "ordinal_codes (n=2000, order 3)": lambda: kernels.ordinal_codes(series, 3, 1),
        "ets_sse_grid (n=40, 1625 rows)": lambda: kernels.ets_sse_grid(y, alpha, beta, phi, y[0], y[1] - y[0]),
        "wis_batch (20000 forecasts)": lambda: kernels.wis_batch(q, obs, LOWER_IDX, UPPER_IDX, MEDIAN_INDEX, INTERVAL_ALPHAS),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.NUMBA_AVAILABLE:
        print("numba is not installed; only the numpy path can be timed")
    print(f"{'kernel':36s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  identical")
    for name, fn in cases(np.random.default_rng(0)).items():
        with _accel.backend(False):
            ref = fn()
            t_np = best_of(fn, args.repeat)
        if _accel.NUMBA_AVAILABLE:
            with _accel.backend(True):
                got = fn()  # compile
                t_nb = best_of(fn, args.repeat)
            print(f"{name:36s} {1e3 * t_np:10.3f} {1e3 * t_nb:10.3f} {t_np / t_nb:7.1f}x  {same(ref, got)}")
        else:
            print(f"{name:36s} {1e3 * t_np:10.3f} {'-':>10s} {'-':>8s}  -")
    return 0


if __name__ == "__main__":
    sys.exit(main())
