"""Timing of the hot kernels: numba against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--n 256]

Each kernel runs once on both backends before timing so numba's compile
time is excluded, and the outputs are compared to make sure both backends
compute the same thing.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from llecomb import kernels
from llecomb.evolution import dispersion_matrix


def cases(n: int):
    rng = np.random.default_rng(0)
    f, d = 1.6, 0.1
    lim = np.sqrt(1 - f**-2)
    # interior points: at the ends the radicand is at rounding level and the backends differ there
    t = np.linspace(-lim, lim, 1_000_002)[1:-1]
    coarse = np.linspace(-lim, lim, 10_000)
    h = kernels.numpy_impl.hat_branch_values(coarse, f, d, 2, 1)
    cells = np.nonzero(np.signbit(h[:-1]) != np.signbit(h[1:]))[0]
    lo = np.repeat(coarse[cells], 2000)
    hi = np.repeat(coarse[cells + 1], 2000)
    ghat = rng.standard_normal(2 * n - 1)
    u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    dt, steps = 1e-3, 1000
    e_half = dispersion_matrix(n, d, dt / 2)
    e_full = dispersion_matrix(n, d, dt)
    sig = np.exp(-(1 + 2.67j) * dt / 2) * np.ones(steps, dtype=complex)
    g = np.full(steps, 1e-3 + 0j)
    return {
        "hat_branch_values (10^6 points)": lambda m: m.hat_branch_values(t, f, d, 2, 1),
        f"bisect_brackets ({lo.size} brackets)": lambda m: m.bisect_brackets(lo, hi, f, d, 2, 1),
        f"cosine_product_matrix (n={n})": lambda m: m.cosine_product_matrix(ghat, n),
        f"kerr_rotate (n={n})": lambda m: m.kerr_rotate(u.copy(), dt),
        f"strang_run (n={n}, {steps} steps)": lambda m: m.strang_run(u.copy(), e_half, e_full, sig, g, dt),
    }


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--n", type=int, default=256)
    args = parser.parse_args(argv)
    if kernels.numba_impl is None:
        raise SystemExit("numba is not installed; nothing to compare")
    backends = {"numpy": kernels.numpy_impl, "numba": kernels.numba_impl}
    print(f"{'kernel':42s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, fn in cases(args.n).items():
        ref, out = fn(backends["numpy"]), fn(backends["numba"])
        assert np.allclose(ref, out, rtol=1e-10, atol=1e-10, equal_nan=True), name
        best = {}
        for label, mod in backends.items():
            number = 3
            best[label] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number * 1e3
        print(f"{name:42s} {best['numpy']:11.3f} {best['numba']:11.3f} {best['numpy'] / best['numba']:7.1f}x")


if __name__ == "__main__":
    main()
