"""Compare the compiled curvature kernel with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--points 2000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from almost_s._core import compiled_curvature_arrays, python_curvature_arrays


def inputs(n, m, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, m, m))
    g = np.eye(m) + 0.1 * a @ np.swapaxes(a, -1, -2)
    dg = rng.normal(size=(n, m, m, m))
    dg = dg + np.swapaxes(dg, 1, 2)
    d2g = rng.normal(size=(n, m, m, m, m))
    d2g = d2g + np.swapaxes(d2g, 1, 2)
    d2g = d2g + np.swapaxes(d2g, 3, 4)
    return g, np.linalg.inv(g), dg, d2g


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'m':>3} {'numpy [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for m in (3, 5, 7):
        data = inputs(args.points, m)
        t_py = min(timeit.repeat(lambda: python_curvature_arrays(*data), number=1, repeat=args.repeat))
        if compiled_curvature_arrays is None:
            print(f"{m:>3} {1e3 * t_py:>12.2f} {'n/a':>12} {'-':>8}")
            continue
        t_c = min(timeit.repeat(lambda: compiled_curvature_arrays(*data), number=1, repeat=args.repeat))
        print(f"{m:>3} {1e3 * t_py:>12.2f} {1e3 * t_c:>12.2f} {t_py / t_c:>8.2f}")


if __name__ == "__main__":
    main()
