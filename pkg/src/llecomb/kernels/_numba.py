"""Numba-compiled versions of the hot kernels (see ``_numpy`` for the contracts)."""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_jit = nb.njit(cache=True, fastmath=False, nogil=True)


@_jit
def _hat_scalar(t, f, d, k, sigma):
    w = 1.0 - t * t
    rad = f**4 * w * w - 1.0
    if rad < 0.0:
        rad = 0.0
    return f * f * w - t / math.sqrt(w) - sigma * math.sqrt(rad) - d * k * k


@_jit
def _hat_values(t, f, d, k, sigma):
    out = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        out[i] = _hat_scalar(t[i], f, d, k, sigma)
    return out


def hat_branch_values(t, f, d, k, sigma):
    t = np.ascontiguousarray(t, dtype=np.float64)
    flat = _hat_values(t.ravel(), float(f), float(d), float(k), float(sigma))
    return flat.reshape(t.shape)


@_jit
def _bisect(lo, hi, f, d, k, sigma, max_iter):
    out = np.empty(lo.shape[0])
    for j in range(lo.shape[0]):
        a = lo[j]
        b = hi[j]
        ha = _hat_scalar(a, f, d, k, sigma)
        for _ in range(max_iter):
            m = 0.5 * (a + b)
            if m <= a or m >= b:
                break
            hm = _hat_scalar(m, f, d, k, sigma)
            if hm == 0.0:
                a = m
                b = m
                break
            if (hm < 0.0) == (ha < 0.0):
                a = m
                ha = hm
            else:
                b = m
        out[j] = 0.5 * (a + b)
    return out


def bisect_brackets(lo, hi, f, d, k, sigma, max_iter=200):
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    return _bisect(lo, hi, float(f), float(d), float(k), float(sigma), int(max_iter))


@_jit
def _product_matrix(ghat, n):
    h = np.empty(2 * n - 1)
    h[0] = ghat[0]
    for q in range(1, 2 * n - 1):
        h[q] = 0.5 * ghat[q]
    out = np.empty((n, n))
    for p in range(n):
        scale = 0.5 if p == 0 else 1.0
        for m in range(n):
            out[p, m] = scale * (h[abs(m - p)] + h[m + p])
    return out


def cosine_product_matrix(ghat, n):
    return _product_matrix(np.ascontiguousarray(ghat, dtype=np.float64), int(n))


@_jit
def _kerr(u, dt):
    for j in range(u.shape[0]):
        z = u[j]
        phase = dt * (z.real * z.real + z.imag * z.imag)
        u[j] = z * complex(math.cos(phase), math.sin(phase))


def kerr_rotate(u, dt):
    _kerr(u, float(dt))
    return u


@_jit
def _strang(u, e_half, e_full, sig, g, dt):
    nsteps = sig.shape[0]
    if nsteps == 0:
        return u.copy()
    v = sig[0] * np.dot(e_half, u) + g[0]
    for i in range(nsteps):
        _kerr(v, dt)
        if i < nsteps - 1:
            v = (sig[i + 1] * sig[i]) * np.dot(e_full, v) + (sig[i + 1] * g[i] + g[i + 1])
        else:
            v = sig[i] * np.dot(e_half, v) + g[i]
    return v


def strang_run(u, e_half, e_full, sig, g, dt):
    return _strang(
        np.ascontiguousarray(u, dtype=np.complex128),
        np.ascontiguousarray(e_half, dtype=np.complex128),
        np.ascontiguousarray(e_full, dtype=np.complex128),
        np.ascontiguousarray(sig, dtype=np.complex128),
        np.ascontiguousarray(g, dtype=np.complex128),
        float(dt),
    )
