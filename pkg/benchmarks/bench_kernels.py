"""Compare the compiled and numpy kernel backends on representative inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each case is timed with ``timeit`` (best of N) after checking that the two
backends agree.
"""
import argparse
import sys
import timeit

import numpy as np

from projection_filter import kernels
from projection_filter.expfam import Bijection, prepare
from projection_filter.polyalg import StatisticsBasis
from projection_filter.quadrature import gauss_chebyshev, smolyak


def _lse_case(dim, natural, extension, grid):
    basis = StatisticsBasis(natural, extension)
    man = prepare(basis, Bijection("arctanh", 1.0), grid)
    theta = np.zeros(basis.m)
    if dim == 1:
        theta[1], theta[3] = 1.0, -1.0
    else:
        theta[basis.natural.index((2, 0))] = theta[basis.natural.index((0, 2))] = -0.5
    args = (man.node_stats, man.log_base, theta, basis.m)
    return lambda b: kernels.lse_dual2(*args, signs=man.signs, backend=b)


def cases():
    rng = np.random.default_rng(0)
    one_d = [(1,), (2,), (3,), (4,)]
    vdp = [(0, 1), (0, 2), (0, 3), (0, 4), (1, 0), (1, 1), (1, 2), (1, 3), (2, 0), (2, 1), (2, 2), (3, 0), (3, 1), (4, 0)]
    ext_2d = [(i, 5 - i) for i in range(6)]
    yield "lse_dual2 1-D, 96 nodes", _lse_case(1, one_d, [(5,), (6,), (7,), (8,)], gauss_chebyshev(96))
    yield "lse_dual2 2-D, 1793 nodes", _lse_case(2, vdp, ext_2d, smolyak("gauss_patterson", 2, 7))

    w = rng.random(40_000)
    w /= w.sum()
    yield "systematic_resample 4e4", lambda b: kernels.systematic_resample(w, 0.37, backend=b)

    n = 1000
    x = np.linspace(-5, 5, n)
    p = np.exp(-x ** 2)
    f = -x
    alpha = np.full(n, 0.16)
    yield "fp_step_1d 1000 nodes", lambda b: kernels.fp_step_1d(p, f, alpha, x[1] - x[0], 1e-4, False, backend=b)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a), np.asarray(b), rtol=1e-10, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        print("compiled backend not built; only the numpy fallback is available", file=sys.stderr)
        return 1
    print(f"{'case':32s} {'cython':>12s} {'numpy':>12s} {'speedup':>8s}")
    for name, fn in cases():
        if not _same(fn("cython"), fn("numpy")):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        times = {}
        for b in ("cython", "numpy"):
            number = max(1, int(0.05 / max(timeit.timeit(lambda: fn(b), number=1), 1e-7)))
            times[b] = min(timeit.repeat(lambda: fn(b), number=number, repeat=args.repeat)) / number
        print(f"{name:32s} {times['cython'] * 1e6:10.1f}us {times['numpy'] * 1e6:10.1f}us "
              f"{times['numpy'] / times['cython']:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
