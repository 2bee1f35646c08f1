"""Strang splitting for the time-dependent Lugiato-Lefever equation.

The equation ``i a_t = (-i + ζ(t)) a - d a_xx - |a|² a + i f`` on ``[0, π]``
with Neumann conditions is split into

* the linear inhomogeneous flow ``a_t = -(1 + iζ) a + i d a_xx + f``, solved
  exactly per cosine mode (mode ``m`` is multiplied by
  ``exp(-(1 + iζ + i d m²) h)``, the forcing enters mode 0 through the
  variation-of-constants formula), and
* the Kerr flow ``a_t = i|a|² a``, solved exactly by ``a ↦ a·exp(i|a|² h)``.

A step is half a linear step, a full Kerr step and another half linear step.
The detuning is frozen at the midpoint of each step.  On the node values the
dispersive factor is a fixed complex ``n × n`` matrix, while damping and
detuning only contribute a scalar, so consecutive half steps are fused into
one matrix-vector product (see :func:`llecomb.kernels.strang_run`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import kernels
from .model import Parameters
from .spectral import FieldState, Grid, coeffs_to_values, values_to_coeffs


@dataclass(frozen=True)
class RampSchedule:
    """Piecewise-linear detuning ``ζ(t)`` through the knots ``(t_i, ζ_i)``.

    The schedule is constant after the last knot; ``T`` is the last knot time.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(z) for z in self.values)
        if len(times) != len(values) or not times:
            raise ValueError("need matching, nonempty knot lists")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("knot times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> float:
        return self.times[-1]

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    @classmethod
    def constant(cls, zeta: float, T: float) -> "RampSchedule":
        return cls((0.0, float(T)), (float(zeta), float(zeta)))

    @classmethod
    def plateau_ramp(
        cls,
        zeta_start: float = -5.0,
        zeta_end: float = 2.67,
        T: float = 1000.0,
        hold: float | None = None,
        ramp_end: float | None = None,
    ) -> "RampSchedule":
        """Hold ``zeta_start`` until ``hold`` (default T/30), ramp linearly to
        ``zeta_end`` at ``ramp_end`` (default T/3) and keep it until ``T``."""
        hold = T / 30.0 if hold is None else hold
        ramp_end = T / 3.0 if ramp_end is None else ramp_end
        return cls((0.0, hold, ramp_end, T), (zeta_start, zeta_start, zeta_end, zeta_end))

    def as_dict(self) -> dict:
        return {"times": list(self.times), "values": list(self.values)}


@dataclass
class Trajectory:
    """Sampled history of an evolution.

    ``snapshots`` maps sample indices to states; ``aborted`` is set when the
    state stopped being finite, in which case ``final`` is the last finite
    sample.
    """

    t: np.ndarray
    zeta: np.ndarray
    l2norm: np.ndarray
    final: FieldState
    snapshots: dict[int, FieldState] = field(default_factory=dict)
    aborted: bool = False
    message: str = ""

    def drift(self, window: float) -> float:
        """``max - min`` of the L² norm over the final ``window`` time units."""
        sel = self.t >= self.t[-1] - window - 1e-9
        vals = self.l2norm[sel]
        return float(vals.max() - vals.min())


# --------------------------------------------------------------------------
# propagators


@lru_cache(maxsize=4)
def _transform_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    eye = np.eye(n)
    to_c = values_to_coeffs(eye)  # column j = coefficients of the j-th unit vector
    to_v = coeffs_to_values(eye)
    return to_c, to_v


@lru_cache(maxsize=16)
def dispersion_matrix(n: int, d: float, h: float) -> np.ndarray:
    """Node-space matrix of ``exp(i d h ∂ₓ²)`` on the cosine series."""
    to_c, to_v = _transform_matrices(n)
    m2 = np.arange(n, dtype=float) ** 2
    phase = np.exp(-1j * d * m2 * h)
    return to_v @ (phase[:, None] * to_c)


def _linear_factors(zeta, f: float, h: float, damping: bool):
    """Scalar multiplier ``σ = e^{λh}`` and forcing increment for each ζ."""
    zeta = np.asarray(zeta, dtype=float)
    lam = -(1.0 if damping else 0.0) - 1j * zeta
    sig = np.exp(lam * h)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(lam != 0, f * (sig - 1.0) / np.where(lam != 0, lam, 1.0), f * h)
    return sig.astype(complex), g.astype(complex)


def linear_half_step(u: FieldState, dt: float, p: Parameters, damping: bool = True) -> FieldState:
    """Exact linear flow over ``dt/2`` (one half of a Strang step)."""
    e = dispersion_matrix(u.n, p.d, dt / 2)
    sig, g = _linear_factors(p.zeta, p.f, dt / 2, damping)
    v = sig * (e @ u.complex) + g
    return FieldState(v.real, v.imag, u.grid)


def kerr_step(u: FieldState, dt: float) -> FieldState:
    """Exact Kerr flow ``a ↦ a·exp(i|a|² dt)``; leaves ``|a|`` unchanged."""
    v = u.complex.copy()
    kernels.kerr_rotate(v, dt)
    return FieldState(v.real, v.imag, u.grid)


def strang_step(u: FieldState, dt: float, p: Parameters, damping: bool = True) -> FieldState:
    """One Strang step with ``ζ = p.zeta`` (the caller supplies the midpoint value).

    ``damping=False`` removes the loss term; with ``f = 0`` the step is then
    time-reversible and a negative ``dt`` is allowed.
    """
    if dt <= 0 and (damping or p.f != 0):
        raise ValueError("dt must be positive")
    v = _run(u.complex, u.n, p.d, dt, np.array([p.zeta]), p.f, damping)
    return FieldState(v.real, v.imag, u.grid)


def _run(v: np.ndarray, n: int, d: float, dt: float, zetas: np.ndarray, f: float, damping: bool) -> np.ndarray:
    e_half = dispersion_matrix(n, d, dt / 2)
    e_full = dispersion_matrix(n, d, dt)
    sig, g = _linear_factors(zetas, f, dt / 2, damping)
    return kernels.strang_run(np.ascontiguousarray(v, dtype=complex), e_half, e_full, sig, g, dt)


def add_noise(u: FieldState, amp: float, seed: int) -> FieldState:
    """``u`` plus independent uniform noise on ``[-amp, amp]`` at every node and field."""
    if amp == 0:
        return u
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-amp, amp, size=(2, u.n))
    return FieldState(u.a1 + noise[0], u.a2 + noise[1], u.grid)


def evolve(
    u0: FieldState,
    ramp: RampSchedule,
    p: Parameters,
    dt: float = 1e-3,
    sample_every: int = 100,
    noise_amp: float = 0.0,
    seed: int = 0,
    snapshot_every: int | None = None,
    T: float | None = None,
    damping: bool = True,
    callback: Callable[[float, FieldState], None] | None = None,
) -> Trajectory:
    """Integrate from ``u0`` over ``[0, T]`` (default ``ramp.T``) with step ``dt``.

    Parameters
    ----------
    ramp : RampSchedule
        Detuning schedule; ``p.zeta`` is ignored, ``p.d`` and ``p.f`` are used.
    sample_every : int
        Steps between recorded samples of the L² norm.
    noise_amp, seed
        Uniform perturbation added to ``u0`` (deterministic given ``seed``).
    snapshot_every : int, optional
        Keep the state every this many samples (and always the last one).
    callback
        Called with ``(t, state)`` at every sample.

    Notes
    -----
    ``T/dt`` must be a multiple of ``sample_every``.  If the state becomes
    non-finite the run stops and returns the last finite sample with
    ``aborted`` set.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if sample_every < 1:
        raise ValueError("sample_every must be at least 1")
    T = ramp.T if T is None else float(T)
    total = T / dt
    nsteps = int(round(total))
    if abs(total - nsteps) > 1e-9 * max(1.0, total):
        raise ValueError("T must be an integer multiple of dt")
    if nsteps % sample_every:
        raise ValueError("dt * sample_every must divide T")
    grid = u0.grid
    u = add_noise(u0, noise_amp, seed)
    v = u.complex
    nsamples = nsteps // sample_every
    ts = np.empty(nsamples + 1)
    zs = np.empty(nsamples + 1)
    norms = np.empty(nsamples + 1)
    snaps: dict[int, FieldState] = {}
    ts[0], zs[0], norms[0] = 0.0, float(ramp(0.0)), u.l2norm
    if snapshot_every:
        snaps[0] = u
    if callback is not None:
        callback(0.0, u)
    mids = (np.arange(nsteps) + 0.5) * dt
    zeta_mid = ramp(mids)
    last = u
    for s in range(1, nsamples + 1):
        chunk = zeta_mid[(s - 1) * sample_every : s * sample_every]
        v = _run(v, grid.n, p.d, dt, chunk, p.f, damping)
        if not np.all(np.isfinite(v)):
            keep = s
            return Trajectory(
                ts[:keep], zs[:keep], norms[:keep], last, snaps, aborted=True,
                message=f"state became non-finite before t={s * sample_every * dt:g}",
            )
        t = s * sample_every * dt
        state = FieldState(v.real, v.imag, grid)
        ts[s], zs[s], norms[s] = t, float(ramp(t)), state.l2norm
        if snapshot_every and (s % snapshot_every == 0 or s == nsamples):
            snaps[s] = state
        if callback is not None:
            callback(t, state)
        last = state
    return Trajectory(ts, zs, norms, last, snaps)


# --------------------------------------------------------------------------
# diagnostics


def complex_coefficients(u: FieldState) -> np.ndarray:
    """Exponential Fourier coefficients ``â_k`` (k ≥ 0) of the even 2π extension.

    With ``a = c_0 + Σ c_k cos(kx)`` (complex ``c_k = c1_k + i c2_k``) one has
    ``â_0 = c_0`` and ``â_k = â_{-k} = c_k/2`` for ``k ≥ 1``.
    """
    c = u.coeffs.reshape(2, u.n)
    ahat = c[0] + 1j * c[1]
    ahat[1:] *= 0.5
    return ahat


SPECTRUM_FLOOR = 1e-300


def spectrum(u: FieldState) -> list[tuple[int, float]]:
    """``(k, log|â_k|)`` for ``k = 0..n-1``; magnitudes are floored at 1e-300."""
    mags = np.maximum(np.abs(complex_coefficients(u)), SPECTRUM_FLOOR)
    return [(k, float(math.log(m))) for k, m in enumerate(mags)]


def periodic_extension(u: FieldState) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and ``|a|`` on ``[0, 2π)`` for the even extension."""
    x = np.concatenate([u.x, 2 * math.pi - u.x[-2:0:-1]])
    amp = u.abs
    return x, np.concatenate([amp, amp[-2:0:-1]])


def count_extrema(u: FieldState, kind: str = "max", min_span: float = 1e-6) -> int:
    """Number of humps (``kind="max"``) or dips (``"min"``) of ``|a|`` on the 2π extension.

    A hump is a connected arc of the circle on which ``|a|`` lies above the
    mid level ``(min + max)/2``; a dip is an arc below it.  Small ripples in
    soliton tails therefore do not count as separate extrema.  States whose
    range of ``|a|`` is below ``min_span`` have none.
    """
    if kind not in ("max", "min"):
        raise ValueError("kind must be 'max' or 'min'")
    _, amp = periodic_extension(u)
    lo, hi = float(amp.min()), float(amp.max())
    if hi - lo < min_span:
        return 0
    mid = 0.5 * (lo + hi)
    mask = amp > mid if kind == "max" else amp < mid
    # arcs on the circle = number of False -> True transitions, cyclically
    return int(np.count_nonzero(mask & ~np.roll(mask, 1)))


def subharmonic_distance(u: FieldState, k: int) -> float:
    """L∞ distance of ``u`` to its 2π/k-periodic part (cosine modes that are multiples of k)."""
    c = u.coeffs.reshape(2, u.n).copy()
    keep = (np.arange(u.n) % k) == 0
    c[:, keep] = 0.0
    rest = coeffs_to_values(c.T)
    return float(np.max(np.hypot(rest[:, 0], rest[:, 1])))


def is_periodic_pattern(u: FieldState, k: int, tol: float = 0.05, min_span: float = 0.1) -> bool:
    """``u`` lies within ``tol`` (L∞) of a 2π/k-periodic state with ``k`` clear maxima."""
    _, amp = periodic_extension(u)
    if float(amp.max() - amp.min()) < min_span:
        return False
    return subharmonic_distance(u, k) < tol and count_extrema(u, "max") == k


def soliton_ansatz(grid: Grid, p: Parameters, background: complex | None = None, center: float = 0.0) -> FieldState:
    """A sech-shaped bright pulse on a constant background (smooth test data).

    Not a solution; used as generic soliton-like initial data.
    """
    from .model import constant_at

    if background is None:
        states = constant_at("hat", p)
        background = complex(states[0].a1, states[0].a2) if states else 0.0
    width = math.sqrt(abs(p.d) / max(abs(p.zeta), 1e-3))
    x = grid.x
    dist = np.minimum(np.abs(x - center), 2 * math.pi - np.abs(x - center))
    pulse = math.sqrt(2 * max(abs(p.zeta), 1e-3)) / np.cosh(dist / width)
    v = background + pulse
    return FieldState(v.real, v.imag, grid)
