"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from fgmkit.ml import _pykernels, kernels


def _best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def split_case(n=2000, d=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    y = np.sin(6 * X[:, 0]) + X[:, 1] ** 2
    return X, y, np.arange(d), 1


def smo_case(n=300, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = np.sin(6 * X[:, 0]) * X[:, 1]
    sq = (X * X).sum(axis=1)
    K = np.exp(-0.5 * (sq[:, None] + sq[None, :] - 2 * X @ X.T))
    return K, y, 1.0, 0.01, 1e-3, 100_000


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    print(f"backend: {kernels.BACKEND}")
    cases = [("best_split", split_case(), _pykernels.best_split, kernels.best_split),
             ("smo_solve", smo_case(), _pykernels.smo_solve, kernels.smo_solve)]
    print(f"{'kernel':<12} {'python s':>10} {'selected s':>11} {'speedup':>8}")
    for name, case, slow, fast in cases:
        t_py = _best_of(lambda: slow(*case), args.repeat)
        t_fast = _best_of(lambda: fast(*case), args.repeat)
        print(f"{name:<12} {t_py:10.4f} {t_fast:11.5f} {t_py / t_fast:8.1f}")


if __name__ == "__main__":
    main()
