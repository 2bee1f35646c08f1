"""Closed-form mathematics of the stationary Lugiato-Lefever system.

The stationary system for ``a = a1 + i a2`` on a 2π-periodic domain is::

    -d a1'' = -a2 - ζ a1 + |a|² a1
    -d a2'' =  a1 - ζ a2 + |a|² a2 - f

Constant solutions form two one-parameter families.  With ``f`` fixed they
are parametrized by ``t ∈ (-1, 1)`` (the *hat* family, ζ is induced); with
``ζ`` fixed they are parametrized by ``s ∈ ℝ`` (the *bar* family, f is
induced).  This module evaluates both families, the a priori bounds and the
candidate bifurcation points on either family together with their
simplicity (S) and transversality (T) flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels

Mode = Literal["hat", "bar"]

#: Equality band for the (S)/(T) tests; values closer than this count as violated.
CONDITION_TOL = 1e-9
#: Values within this band of a violation are flagged ``marginal``.
MARGINAL_TOL = 1e-6
#: Grid nodes with ``|h|`` below this and no sign change mark tangential roots.
TANGENTIAL_TOL = 1e-8
#: Default truncation of the (infinite) bar-mode candidate list when ``d > 0``.
DEFAULT_K_MAX = 64


class DomainError(ValueError):
    """An argument lies outside the domain of a parametrization."""


class PreconditionError(ValueError):
    """An operation was called on inputs that violate its precondition."""


@dataclass(frozen=True)
class Parameters:
    """Dispersion ``d`` (nonzero), detuning ``zeta`` and forcing ``f``."""

    d: float
    zeta: float = 0.0
    f: float = 0.0

    def __post_init__(self):
        for name in ("d", "zeta", "f"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"parameter {name} must be finite, got {value!r}")
        if self.d == 0:
            raise ValueError("the dispersion d must be nonzero")

    @property
    def sign_d(self) -> float:
        return 1.0 if self.d > 0 else -1.0

    def active(self, mode: Mode) -> float:
        """Value of the continuation parameter (ζ for hat, f for bar)."""
        return self.zeta if mode == "hat" else self.f

    def with_active(self, mode: Mode, value: float) -> "Parameters":
        if mode == "hat":
            return replace(self, zeta=float(value))
        return replace(self, f=float(value))


@dataclass(frozen=True)
class ConstantState:
    """A constant solution on one of the two trivial families.

    ``coord`` is ``t`` for the hat family and ``s`` for the bar family;
    ``zeta`` and ``f`` are the parameters the state solves the system for.
    """

    a1: float
    a2: float
    coord: float
    mode: Mode
    zeta: float
    f: float

    @property
    def a(self) -> np.ndarray:
        return np.array([self.a1, self.a2])

    @property
    def abs2(self) -> float:
        return self.a1 * self.a1 + self.a2 * self.a2

    @property
    def param(self) -> float:
        return self.zeta if self.mode == "hat" else self.f

    def residual(self) -> np.ndarray:
        """Right-hand side minus left-hand side of the system with zero derivatives."""
        r = self.abs2
        return np.array(
            [
                -self.a2 - self.zeta * self.a1 + r * self.a1,
                self.a1 - self.zeta * self.a2 + r * self.a2 - self.f,
            ]
        )

    def amplitude_identity_defect(self) -> float:
        """``f² - |a|²(1 + (|a|² - ζ)²)``; zero for every constant solution."""
        r = self.abs2
        return self.f * self.f - r * (1.0 + (r - self.zeta) ** 2)


@dataclass(frozen=True)
class KernelPair:
    """Kernel direction ``alpha`` and adjoint kernel direction ``beta`` in ℝ²."""

    alpha: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class BifurcationCandidate:
    """A point of a trivial family where the linearization has a kernel."""

    mode: Mode
    k: int
    sigma: int
    coord: float
    param: float
    state: ConstantState
    s_ok: bool
    t_ok: bool
    kernel: KernelPair | None
    marginal: bool = False
    tangential: bool = False

    @property
    def licensed(self) -> bool:
        """True when both (S) and (T) hold, i.e. a bifurcating curve is guaranteed."""
        return self.k >= 1 and self.s_ok and self.t_ok

    @property
    def label(self) -> str:
        if self.k == 0:
            return "turning point, no bifurcation"
        return "bifurcation" if self.licensed else "candidate"


@dataclass(frozen=True)
class BoundsReport:
    gamma: float
    linf_bound: float
    zeta_star_lo: float
    zeta_star_hi: float
    khat: float
    kbar: float | None

    def in_window(self, zeta: float, d: float, slack: float = 0.0) -> bool:
        """Whether ``sign(d)·ζ`` lies in ``[ζ_*, ζ*]`` widened by ``slack``."""
        sz = math.copysign(1.0, d) * zeta
        return self.zeta_star_lo - slack <= sz <= self.zeta_star_hi + slack

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "linf_bound": self.linf_bound,
            "zeta_star_lo": self.zeta_star_lo,
            "zeta_star_hi": self.zeta_star_hi,
            "khat": self.khat,
            "kbar": self.kbar,
        }


# --------------------------------------------------------------------------
# trivial families


def trivial_hat(t: float, f: float, d: float | None = None) -> ConstantState:
    """Constant solution at coordinate ``t`` of the family with fixed forcing ``f``.

    Constant states do not feel the dispersion, so ``d`` is accepted only for
    call-site symmetry with the other family operations and is ignored.

    Raises
    ------
    DomainError
        If ``|t| >= 1``.
    """
    t = float(t)
    if not abs(t) < 1.0:
        raise DomainError(f"hat coordinate must satisfy |t| < 1, got {t!r}")
    w = 1.0 - t * t
    rw = math.sqrt(w)
    return ConstantState(
        a1=f * w,
        a2=-f * t * rw,
        coord=t,
        mode="hat",
        zeta=f * f * w + t / rw,
        f=float(f),
    )


def trivial_bar(s: float, zeta: float) -> ConstantState:
    """Constant solution at coordinate ``s`` of the family with fixed detuning ``zeta``."""
    s = float(s)
    q = s * s - zeta
    root = math.sqrt(1.0 + q * q)
    return ConstantState(
        a1=s / root,
        a2=s * q / root,
        coord=s,
        mode="bar",
        zeta=float(zeta),
        f=s * root,
    )


def hat_zeta(t):
    """``ζ̂(t) = f²(1-t²) + t/√(1-t²)`` without the f-part; see :func:`hat_zeta_f`."""
    t = np.asarray(t, dtype=float)
    return t / np.sqrt(1.0 - t * t)


def hat_zeta_f(t, f):
    t = np.asarray(t, dtype=float)
    w = 1.0 - t * t
    return f * f * w + t / np.sqrt(w)


def bar_f(s, zeta):
    s = np.asarray(s, dtype=float)
    return s * np.sqrt(1.0 + (s * s - zeta) ** 2)


def trivial_state(mode: Mode, coord: float, p: Parameters) -> ConstantState:
    """Dispatch to :func:`trivial_hat` (uses ``p.f``) or :func:`trivial_bar` (uses ``p.zeta``)."""
    if mode == "hat":
        return trivial_hat(coord, p.f)
    return trivial_bar(coord, p.zeta)


# --------------------------------------------------------------------------
# a priori bounds


def bounds_report(p: Parameters) -> BoundsReport:
    """A priori L∞ bound, nonexistence window and counting bounds for ``p``."""
    d, f, zeta = p.d, p.f, p.zeta
    ad = abs(d)
    f2 = f * f
    h1 = 1.0 + 12.0 * math.pi**2 * f2 / ad
    gamma = 36.0 * math.pi**2 * f2 * f2 / ad
    if d < 0:
        gamma += f2 * h1 * h1
    linf = abs(f) * h1 / max(1.0, -zeta * p.sign_d - gamma)
    lo = -gamma - math.sqrt(6.0) * abs(f) * h1
    hi = 6.0 * f2 * h1 * h1
    if abs(f) >= 1.0:
        khat = 2.0 * math.sqrt((f2 + math.sqrt(f2 - 1.0) + math.sqrt(f2 * f2 - 1.0)) / ad)
    else:
        khat = 0.0
    kbar = None
    if d < 0:
        kbar = 4.0 * math.sqrt(max(zeta - math.sqrt(3.0), 0.0) / ad)
    return BoundsReport(gamma, linf, lo, hi, khat, kbar)


# --------------------------------------------------------------------------
# kernels of the linearization at constant states


def n_matrix(a, zeta: float) -> np.ndarray:
    """Pointwise 2×2 matrix of the linearized cubic and coupling terms."""
    a1, a2 = float(a[0]), float(a[1])
    return np.array(
        [
            [-zeta + 3 * a1 * a1 + a2 * a2, -1.0 + 2 * a1 * a2],
            [1.0 + 2 * a1 * a2, -zeta + a1 * a1 + 3 * a2 * a2],
        ]
    )


def kernel_condition(a, zeta: float, d: float, k: int) -> float:
    """``(ζ+dk²)² - 4|a|²(ζ+dk²) + 1 + 3|a|⁴``, the determinant of ``dk²I - N``."""
    q = zeta + d * k * k
    r = float(a[0]) ** 2 + float(a[1]) ** 2
    return q * q - 4.0 * r * q + 1.0 + 3.0 * r * r


def _condition_scale(a, zeta: float, d: float, k: int) -> float:
    q = zeta + d * k * k
    r = float(a[0]) ** 2 + float(a[1]) ** 2
    return max(1.0, q * q, 4.0 * abs(r * q), 3.0 * r * r)


def kernel_vectors(a, zeta: float, d: float, k: int, tol: float = 1e-8) -> KernelPair:
    """Kernel and adjoint-kernel directions of ``dk²I - N(a, ζ)``.

    The generic formulas are used unless the state sits exactly on the
    degenerate line ``a1·a2 = ±1/2``, ``3a1² + a2² = ζ + dk²`` (within 1e-12),
    where the first components of the generic vectors vanish.

    Raises
    ------
    PreconditionError
        If ``kernel_condition`` is not zero to within ``tol`` (relative to the
        size of its terms).
    """
    value = kernel_condition(a, zeta, d, k)
    if abs(value) > tol * _condition_scale(a, zeta, d, k):
        raise PreconditionError(
            f"kernel condition is {value:.3e} at k={k}; the matrix dk²I - N is not singular"
        )
    a1, a2 = float(a[0]), float(a[1])
    q = zeta + d * k * k
    p = a1 * a2
    g11 = 3 * a1 * a1 + a2 * a2
    g22 = a1 * a1 + 3 * a2 * a2
    on_line = abs(g11 - q) <= 1e-12
    if abs(p - 0.5) <= 1e-12 and on_line:
        alpha = np.array([g22 - q, -1.0 - 2 * p])
    else:
        alpha = np.array([1.0 - 2 * p, g11 - q])
    if abs(p + 0.5) <= 1e-12 and on_line:
        beta = np.array([g22 - q, 1.0 - 2 * p])
    else:
        beta = np.array([-1.0 - 2 * p, g11 - q])
    return KernelPair(alpha=alpha, beta=beta)


def kernel_residuals(pair: KernelPair, a, zeta: float, d: float, k: int) -> tuple[float, float]:
    """Max-norm residuals of ``(dk²I - N)α`` and ``(dk²I - N)ᵀβ``."""
    m = d * k * k * np.eye(2) - n_matrix(a, zeta)
    return float(np.max(np.abs(m @ pair.alpha))), float(np.max(np.abs(m.T @ pair.beta)))


# --------------------------------------------------------------------------
# conditions (S) and (T)


def _square_gap(x: float, k: int) -> float:
    """Distance from ``x`` to the nearest ``j²`` with ``j ∈ ℕ₀ \\ {k}``."""
    base = int(math.isqrt(int(max(x, 0.0)))) if x < 2**52 else int(math.sqrt(x))
    gaps = [abs(x - j * j) for j in range(max(base - 1, 0), base + 3) if j != k]
    return min(gaps)


def hat_simplicity_value(t: float, f: float, d: float, k: int) -> float:
    w = 1.0 - t * t
    return -k * k + 2.0 / d * (f * f * w - t / math.sqrt(w))


def hat_transversality_value(t: float, f: float, sigma: int) -> float:
    w = 1.0 - t * t
    rad = math.sqrt(max(f**4 * w * w - 1.0, 0.0))
    return (
        4 * f**6 * t**3 * w * w
        + f**4 * math.sqrt(w)
        - 2 * t * f * f
        - w**-1.5
        - sigma * rad * (4 * f**4 * t**3 * w + f * f * (2 * t * t - 1) / math.sqrt(w))
    )


def bar_simplicity_value(zeta: float, d: float, k: int, sigma: int) -> float:
    q = zeta + d * k * k
    return -k * k + (2.0 / 3.0) / d * (zeta + 4 * d * k * k - 2 * sigma * math.sqrt(max(q * q - 3.0, 0.0)))


def bar_transversality_values(zeta: float, d: float, k: int, sigma: int) -> tuple[float, float, float]:
    q = zeta + d * k * k
    root = math.sqrt(max(q * q - 3.0, 0.0))
    return (
        q - math.sqrt(3.0),
        4 * zeta + d * k * k - 2 * sigma * root,
        2 * zeta + 5 * d * k * k - 4 * sigma * root,
    )


def _flags(s_gap: float, t_values) -> tuple[bool, bool, bool]:
    t_min = min(abs(v) for v in t_values)
    s_ok = s_gap > CONDITION_TOL
    t_ok = t_min > CONDITION_TOL
    marginal = s_gap <= MARGINAL_TOL or t_min <= MARGINAL_TOL
    return s_ok, t_ok, marginal


def _safe_kernel(state: ConstantState, d: float, k: int) -> KernelPair | None:
    try:
        return kernel_vectors(state.a, state.zeta, d, k, tol=1e-6)
    except PreconditionError:
        return None


# --------------------------------------------------------------------------
# enumeration


def hat_branch_function(t, f: float, d: float, k: int, sigma: int):
    """``f²(1-t²) - t/√(1-t²) - σ√(f⁴(1-t²)²-1) - dk²``; its zeros are the candidates."""
    return kernels.hat_branch_values(np.asarray(t, dtype=float), f, d, k, sigma)


def _hat_roots(f, d, k, sigma, grid):
    """Sign-change roots and tangential near-roots of the hat branch function on ``grid``."""
    h = hat_branch_function(grid, f, d, k, sigma)
    roots = []
    exact = np.nonzero(h == 0.0)[0]
    roots.extend((float(grid[i]), False) for i in exact)
    s = np.signbit(h)
    cells = np.nonzero((s[:-1] != s[1:]) & (h[:-1] != 0.0) & (h[1:] != 0.0))[0]
    if cells.size:
        refined = kernels.bisect_brackets(grid[cells], grid[cells + 1], f, d, k, sigma)
        roots.extend((float(r), False) for r in refined)
    # double roots: |h| tiny at a node, local minimum of |h|, no sign change nearby
    ah = np.abs(h)
    for i in np.nonzero(ah < TANGENTIAL_TOL)[0]:
        if h[i] == 0.0:
            continue
        lo, hi = max(i - 1, 0), min(i + 1, grid.size - 1)
        if np.any(s[lo : hi + 1] != s[i]):
            continue
        if ah[i] > ah[lo] or ah[i] > ah[hi]:
            continue
        res = minimize_scalar(
            lambda x: abs(float(hat_branch_function(np.array([x]), f, d, k, sigma)[0])),
            bounds=(float(grid[lo]), float(grid[hi])),
            method="bounded",
            options={"xatol": 1e-13},
        )
        roots.append((float(res.x), True))
    return roots


def enumerate_bifpoints_hat(
    f: float,
    d: float,
    include_k0: bool = False,
    grid_points: int = 10_000,
) -> list[BifurcationCandidate]:
    """Candidate bifurcation points on the trivial family with fixed forcing ``f``.

    For every ``k`` in ``1..floor(k̂(f)/2)`` and ``σ = ±1`` the roots of
    :func:`hat_branch_function` in ``[-√(1-f⁻²), √(1-f⁻²)]`` are bracketed on a
    uniform grid and bisected to full precision.  Returns an empty list when
    ``|f| < 1``.  Candidates are sorted by ``k``, then ``σ``, then ``t``.
    """
    if d == 0:
        raise ValueError("the dispersion d must be nonzero")
    f = float(f)
    if abs(f) < 1.0:
        return []
    tau = math.sqrt(1.0 - 1.0 / (f * f))
    grid = np.linspace(-tau, tau, grid_points)
    khat = bounds_report(Parameters(d=d, f=f)).khat
    k_top = int(math.floor(khat / 2.0 + 1e-12))
    out: list[BifurcationCandidate] = []
    for k in range(0 if include_k0 else 1, k_top + 1):
        found: list[tuple[float, int, bool]] = []
        for sigma in (-1, 1):
            for t, tangential in _hat_roots(f, d, k, sigma, grid):
                if any(abs(t - t0) < 1e-9 for t0, _, _ in found):
                    continue  # both σ-branches meet at the interval ends
                found.append((t, sigma, tangential))
        for t, sigma, tangential in found:
            state = trivial_hat(t, f)
            s_gap = _square_gap(hat_simplicity_value(t, f, d, k), k)
            s_ok, t_ok, marginal = _flags(s_gap, [hat_transversality_value(t, f, sigma)])
            out.append(
                BifurcationCandidate(
                    mode="hat",
                    k=k,
                    sigma=sigma,
                    coord=t,
                    param=state.zeta,
                    state=state,
                    s_ok=s_ok,
                    t_ok=t_ok,
                    kernel=_safe_kernel(state, d, k),
                    marginal=marginal,
                    tangential=tangential,
                )
            )
    out.sort(key=lambda c: (c.k, c.sigma, c.coord))
    return out


def enumerate_bifpoints_bar(
    zeta: float,
    d: float,
    include_k0: bool = False,
    k_max: int = DEFAULT_K_MAX,
) -> list[BifurcationCandidate]:
    """Candidate bifurcation points (with ``s > 0``) on the family with fixed detuning.

    Every ``k`` with ``ζ + dk² ≥ √3`` contributes the closed-form
    ``s = (2/3(ζ+dk²) - σ/3·√((ζ+dk²)²-3))^{1/2}`` for each ``σ``.  For ``d < 0``
    the list is complete; for ``d > 0`` infinitely many candidates exist and
    only ``k ≤ k_max`` is reported.  Negative-``f`` candidates follow from the
    symmetry ``(a1, a2, f) ↦ (-a1, -a2, -f)`` and are not listed.
    """
    if d == 0:
        raise ValueError("the dispersion d must be nonzero")
    zeta = float(zeta)
    sqrt3 = math.sqrt(3.0)
    if d < 0:
        k_top = int(math.floor(math.sqrt(max(zeta - sqrt3, 0.0) / abs(d)))) + 1
    else:
        k_top = int(k_max)
    out: list[BifurcationCandidate] = []
    for k in range(0 if include_k0 else 1, k_top + 1):
        q = zeta + d * k * k
        if q < sqrt3:
            continue
        root = math.sqrt(q * q - 3.0)
        seen: list[float] = []
        for sigma in (-1, 1):
            s = math.sqrt(2.0 / 3.0 * q - sigma / 3.0 * root)
            if any(abs(s - s0) < 1e-12 for s0 in seen):
                continue
            seen.append(s)
            state = trivial_bar(s, zeta)
            s_gap = _square_gap(bar_simplicity_value(zeta, d, k, sigma), k)
            s_ok, t_ok, marginal = _flags(s_gap, bar_transversality_values(zeta, d, k, sigma))
            out.append(
                BifurcationCandidate(
                    mode="bar",
                    k=k,
                    sigma=sigma,
                    coord=s,
                    param=state.f,
                    state=state,
                    s_ok=s_ok,
                    t_ok=t_ok,
                    kernel=_safe_kernel(state, d, k),
                    marginal=marginal,
                )
            )
    out.sort(key=lambda c: (c.k, c.sigma, c.coord))
    return out


def enumerate_bifpoints(mode: Mode, p: Parameters, **kwargs) -> list[BifurcationCandidate]:
    if mode == "hat":
        return enumerate_bifpoints_hat(p.f, p.d, **kwargs)
    return enumerate_bifpoints_bar(p.zeta, p.d, **kwargs)


def mirror_bar_state(state: ConstantState) -> ConstantState:
    """Image of a bar-family state under ``(a1, a2, f) ↦ (-a1, -a2, -f)``."""
    return ConstantState(-state.a1, -state.a2, -state.coord, state.mode, state.zeta, -state.f)


def constant_at(mode: Mode, p: Parameters) -> list[ConstantState]:
    """All constant solutions at the parameter point ``p`` (roots of the cubic in |a|²).

    Solves ``f² = r(1 + (r-ζ)²)`` for ``r = |a|² ≥ 0`` and maps each root back
    to the family coordinate of ``mode``.
    """
    coeffs = [1.0, -2.0 * p.zeta, 1.0 + p.zeta * p.zeta, -p.f * p.f]
    roots = np.roots(coeffs)
    out = []
    for r in sorted(float(z.real) for z in roots if abs(z.imag) < 1e-9 * max(1.0, abs(z)) and z.real >= 0):
        if mode == "bar":
            s = math.copysign(math.sqrt(r), p.f) if p.f != 0 else math.sqrt(r)
            out.append(trivial_bar(s, p.zeta))
        else:
            if p.f == 0:
                continue
            # ζ - |a|² = t/√(1-t²)  ⇒  t = x/√(1+x²)
            x = p.zeta - r
            out.append(trivial_hat(x / math.sqrt(1.0 + x * x), p.f))
    return out
