"""Compare the numba and numpy binning kernels on synthetic traces.

Usage: python benchmarks/bench_binning.py [--n 5000000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from tokenwatt import DEFAULT_GRID
from tokenwatt._kernels import bin_counts_numba, bin_counts_numpy, numba_enabled


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=5_000_000,
                        help="requests per trial (default 5e6)")
    parser.add_argument("--repeat", type=int, default=5,
                        help="trials per backend; best time wins (default 5)")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    inputs = rng.integers(0, 10_000, size=args.n).astype(np.int64)
    outputs = rng.integers(0, 600, size=args.n).astype(np.int64)
    input_bins = np.asarray(DEFAULT_GRID.input_bins, dtype=np.int64)
    output_bins = np.asarray(DEFAULT_GRID.output_bins, dtype=np.int64)
    kernel_args = (inputs, outputs, input_bins, output_bins)

    results = {}
    if numba_enabled():
        bin_counts_numba(*kernel_args)  # trigger JIT compile outside the timer
        results["numba"] = _time(bin_counts_numba, kernel_args, args.repeat)
    else:
        print("numba disabled or unavailable; timing numpy only")
    results["numpy"] = _time(bin_counts_numpy, kernel_args, args.repeat)

    for name, seconds in sorted(results.items(), key=lambda kv: kv[1]):
        print(f"{name:>6}: {seconds * 1e3:8.2f} ms  "
              f"({args.n / seconds / 1e6:7.1f} M requests/s)")
    if len(results) == 2:
        print(f"speedup: {results['numpy'] / results['numba']:.2f}x (numba over numpy)")

    # both backends must agree before the numbers mean anything
    a = bin_counts_numpy(*kernel_args)
    if numba_enabled():
        b = bin_counts_numba(*kernel_args)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
