"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-repeat wall time for each
backend and the speedup.  Inputs mirror the sizes used in the contour
integrals and in the El Karoui LP.
"""
import argparse
import timeit

import numpy as np

from rcca import _fallback

try:
    from rcca import _kernels
except ImportError:  # pragma: no cover
    _kernels = None


def cases(rng):
    z = np.linspace(-1, 6, 512) + 1j * np.linspace(0.02, 1.0, 512)
    loc = rng.uniform(0.2, 4.0, 200)
    w = rng.dirichlet(np.ones(200))
    loc3, w3 = np.array([0.5, 1.5, 3.0]), np.array([0.2, 0.5, 0.3])

    # dense LP tableau in the shape of the spectrum fit (80 rows, 51 columns)
    m, n = 80, 51
    A = rng.uniform(0, 1, (m, n))
    T0 = np.zeros((m + 1, n + m + 1))
    T0[:m, :n] = A
    T0[:m, n:n + m] = np.eye(m)
    T0[:m, -1] = rng.uniform(1, 2, m)
    T0[m, :n] = -rng.uniform(0.1, 1, n)
    B0 = np.arange(n, n + m, dtype=np.int64)

    def simplex(mod):
        return lambda: mod.simplex_pivots(T0.copy(), B0.copy())

    return {
        "atoms_stieltjes (512 z, 200 atoms)":
            lambda mod: lambda: mod.atoms_stieltjes(z, loc, w, 1),
        "fp_y2t (512 z, 3 atoms)":
            lambda mod: lambda: mod.fp_y2t(z, loc3, w3, 0.4),
        "fp_regime_a (512 z, 3 atoms)":
            lambda mod: lambda: mod.fp_regime_a(z, loc3, w3, 0.6, 0.4),
        "fp_companion (512 z, 200 atoms)":
            lambda mod: lambda: mod.fp_companion(z, loc, w, 0.3),
        "simplex_pivots (80 x 131 tableau)": simplex,
    }


def best(fn, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; run pip install -e . --no-build-isolation")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':38s} {'cython':>11s} {'numpy':>11s} {'speedup':>8s}")
    for name, make in cases(rng).items():
        tc = best(make(_kernels), args.repeat)
        tp = best(make(_fallback), args.repeat)
        print(f"{name:38s} {tc * 1e3:9.3f}ms {tp * 1e3:9.3f}ms {tp / tc:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
