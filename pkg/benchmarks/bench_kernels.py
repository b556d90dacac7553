"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from commpd import _kernels_py

try:
    from commpd import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def cases():
    rng = np.random.default_rng(0)
    ranks = np.arange(1.0, 19.0)
    X = rng.normal(size=(2000, 50))
    C = rng.normal(size=(8, 50))
    kinds = rng.integers(0, 3, 600)
    partners = np.arange(600).reshape(-1, 2)[:, ::-1].ravel()
    return {
        "mwu_exact_counts (9 of 18)": lambda k: k.mwu_exact_counts(ranks, 9, 90.0),
        "nearest_centroid (2000x50, k=8)": lambda k: k.nearest_centroid(X, C),
        "play_supergame (600 subjects, 40 rounds)": lambda k: k.play_supergame(kinds, partners, 40),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels_c is None:
        print("compiled extension not built; only the fallback can be timed")
    print(f"{'kernel':<42}{'python [s]':>12}{'cython [s]':>12}{'speed-up':>10}")
    for name, fn in cases().items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        if _kernels_c is None:
            print(f"{name:<42}{t_py:>12.4f}{'-':>12}{'-':>10}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_kernels_c), number=1, repeat=args.repeat))
        print(f"{name:<42}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
