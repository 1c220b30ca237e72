"""Time the numba and pure-numpy variants of the hot kernels.

    python3 benchmarks/bench_kernels.py [--n 1008] [--repeat 200]

Both variants are checked for agreement before timing.
"""
import argparse
import timeit

import numpy as np

from etfopt import kernels
from etfopt._accel import HAVE_NUMBA

AG_ARGS = (0.0002, 0.2, -0.1, 2e-6, 0.08, 0.9, 6.0, 1e-4)


def cases(n, rng):
    r = rng.standard_t(6, n) * 0.01
    prices = 100.0 * np.cumprod(1.0 + r)
    return {
        "ag_filter": (kernels._ag_filter_jit, kernels._ag_filter_numpy, (r, *AG_ARGS)),
        "max_drawdown": (kernels._max_drawdown_jit, kernels._max_drawdown_numpy, (prices,)),
        "compound": (kernels._compound_jit, kernels._compound_numpy, (r, 100.0)),
    }


def check(name, fast, slow, args):
    a, b = fast(*args), slow(*args)
    if name == "ag_filter":
        assert np.allclose(a[1], b[1], rtol=1e-10) and abs(a[2] - b[2]) <= 1e-9 * abs(b[2])
    else:
        assert np.allclose(a, b, rtol=1e-12)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1008, help="series length (default: one backtest window)")
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy variants exist")
    rng = np.random.default_rng(0)
    print(f"{'kernel':14s} {'numba us':>10s} {'numpy us':>10s} {'speedup':>8s}")
    for name, (fast, slow, fargs) in cases(args.n, rng).items():
        check(name, fast, slow, fargs)
        fast(*fargs)  # compile outside the timing
        t_fast = min(timeit.repeat(lambda: fast(*fargs), number=args.repeat, repeat=3)) / args.repeat
        t_slow = min(timeit.repeat(lambda: slow(*fargs), number=args.repeat, repeat=3)) / args.repeat
        print(f"{name:14s} {t_fast * 1e6:10.1f} {t_slow * 1e6:10.1f} {t_slow / t_fast:8.1f}x")


if __name__ == "__main__":
    main()
