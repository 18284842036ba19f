#!/usr/bin/env python3
"""Benchmark the compiled greedy-ROI kernel against the NumPy fallback.

Both implementations share the greedy windowed-argmax contract; this script
times them on identical random criterion maps and verifies their outputs
agree before reporting speedups.

Usage: python3 benchmarks/bench_roi_kernel.py [--repeats N]
"""

import argparse
import time

import numpy as np

from gmic3d.roi import HAVE_COMPILED_KERNEL
from gmic3d.roi._greedy_py import greedy_select as greedy_py

if HAVE_COMPILED_KERNEL:
    from gmic3d.roi._greedy import greedy_select as greedy_c
else:
    greedy_c = None

CASES = [
    # (depth, h, w, win, k, zeta)   saliency grids at various scales
    ("desk 12x12x16", 16, 12, 12, 4, 3, 2),
    ("mid 84x53x40", 40, 84, 53, 16, 8, 10),
    ("full 133x84x96", 96, 133, 84, 16, 8, 10),
]


def run(fn, a, win, k, zeta, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(a, win, win, k, zeta)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"compiled kernel available: {HAVE_COMPILED_KERNEL}")
    header = f"{'case':<18}{'numpy (ms)':>12}{'compiled (ms)':>15}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, depth, h, w, win, k, zeta in CASES:
        a = rng.random((depth, h, w))
        t_py, (picks_py, scores_py) = run(greedy_py, a, win, k, zeta, args.repeats)
        if greedy_c is None:
            print(f"{name:<18}{t_py * 1e3:>12.2f}{'n/a':>15}{'n/a':>9}")
            continue
        t_c, (picks_c, scores_c) = run(greedy_c, a, win, k, zeta, args.repeats)
        np.testing.assert_array_equal(picks_py, picks_c)
        np.testing.assert_allclose(scores_py, scores_c, atol=1e-12)
        print(
            f"{name:<18}{t_py * 1e3:>12.2f}{t_c * 1e3:>15.2f}"
            f"{t_py / t_c:>8.1f}x"
        )


if __name__ == "__main__":
    main()
