"""Pure-numpy versions of the hot kernels.

Every function here has a twin of the same name and signature in
``_numba``; the two are interchangeable and are checked against each other
in the test suite.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def hat_branch_values(t, f, d, k, sigma):
    """Evaluate ``f²(1-t²) - t/√(1-t²) - σ√(f⁴(1-t²)²-1) - dk²`` on an array of t.

    The radicand is clipped at zero, which only matters at the endpoints
    ``|t| = √(1-f⁻²)`` where it vanishes analytically.
    """
    t = np.asarray(t, dtype=np.float64)
    w = 1.0 - t * t
    rad = np.maximum(f**4 * w * w - 1.0, 0.0)
    return f * f * w - t / np.sqrt(w) - sigma * np.sqrt(rad) - d * k * k


def bisect_brackets(lo, hi, f, d, k, sigma, max_iter=200):
    """Refine sign-change brackets of :func:`hat_branch_values` in parallel.

    Iterates until no representable midpoint is left, so the final bracket
    width is a few ulps of t.
    """
    lo = np.array(lo, dtype=np.float64, copy=True)
    hi = np.array(hi, dtype=np.float64, copy=True)
    if lo.size == 0:
        return lo
    hlo = hat_branch_values(lo, f, d, k, sigma)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not active.any():
            break
        hm = hat_branch_values(mid, f, d, k, sigma)
        hit = active & (hm == 0.0)
        lo[hit] = mid[hit]
        hi[hit] = mid[hit]
        same = active & ~hit & (np.signbit(hm) == np.signbit(hlo))
        other = active & ~hit & ~same
        lo[same] = mid[same]
        hlo[same] = hm[same]
        hi[other] = mid[other]
    return 0.5 * (lo + hi)


@lru_cache(maxsize=16)
def _product_indices(n):
    idx = np.arange(n)
    diff = np.abs(idx[:, None] - idx[None, :])
    total = idx[:, None] + idx[None, :]
    return diff, total


def cosine_product_matrix(ghat, n):
    """Matrix of ``c ↦ P_n(g · Σ c_m cos(mx))`` in the cosine basis.

    ``ghat`` holds the cosine coefficients of ``g`` up to index ``2n-2``.
    Row ``p`` carries the factor ``ε_p/2`` and each coefficient is divided by
    ``ε_q`` (``ε_0 = 1``, ``ε_q = 2`` otherwise), which is the Galerkin
    projection for the L² inner product on (0, π).
    """
    ghat = np.asarray(ghat, dtype=np.float64)
    h = ghat[: 2 * n - 1].copy()
    h[1:] *= 0.5
    diff, total = _product_indices(n)
    out = h[diff] + h[total]
    out[0] *= 0.5  # rows p >= 1 carry ε_p/2 = 1
    return out


def kerr_rotate(u, dt):
    """In place ``u ← u·exp(i·dt·|u|²)``; leaves ``|u|`` unchanged."""
    u *= np.exp(1j * dt * (u.real * u.real + u.imag * u.imag))
    return u


def strang_run(u, e_half, e_full, sig, g, dt):
    """Advance ``len(sig)`` Strang steps with merged linear half-steps.

    Step ``i`` applies the affine half-step ``v ↦ sig[i]·E v + g[i]`` (``E``
    the dispersive propagator over ``dt/2``), the Kerr rotation over ``dt``
    and the same half-step again.  Consecutive half-steps are fused into
    one product with ``e_full = E²``.
    """
    nsteps = sig.shape[0]
    if nsteps == 0:
        return u.copy()
    v = sig[0] * (e_half @ u) + g[0]
    for i in range(nsteps):
        kerr_rotate(v, dt)
        if i < nsteps - 1:
            v = (sig[i + 1] * sig[i]) * (e_full @ v) + (sig[i + 1] * g[i] + g[i + 1])
        else:
            v = sig[i] * (e_half @ v) + g[i]
    return v
