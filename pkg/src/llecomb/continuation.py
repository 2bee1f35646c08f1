"""Pseudo-arclength continuation of nontrivial branches.

A branch is a curve ``X(s) = (c(s), λ(s))`` of zeros of the Galerkin
residual, where ``c`` holds the cosine coefficients of the state and ``λ``
is the active parameter (``ζ`` in hat mode with ``f`` fixed, ``f`` in bar
mode with ``ζ`` fixed).  Distances in ``X`` use the L²(0, π) norm for the
state and the absolute value for ``λ``.

Each step predicts along the secant, corrects with Newton on the bordered
system ``R(c, λ) = 0``, ``⟨τ, X - X_prev⟩ = ds`` and then logs events:

``turning_point``
    the λ-component of the secant changes sign,
``secondary_bif_candidate``
    the sign of ``det R_c`` flips without a turning point,
``trivial_return``
    the branch crosses the curve of constant solutions again,
``step_limit``
    ``max_steps`` reached or the step size fell below ``ds_min``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .model import (
    BifurcationCandidate,
    Mode,
    Parameters,
    bounds_report,
    enumerate_bifpoints,
    trivial_state,
)
from .spectral import (
    FieldState,
    Grid,
    NewtonConvergenceError,
    SingularJacobianError,
    get_grid,
    coeffs_norm,
    jacobian_coeffs,
    l2norm_coeffs,
    lu_solve_checked,
    min_eigenvalue,
    residual_coeffs,
)

log = logging.getLogger(__name__)

EVENT_KINDS = ("turning_point", "trivial_return", "secondary_bif_candidate", "step_limit")
MAX_POINTS = 20_000
WINDOW_SLACK = 1.0
NONCONSTANT_TOL = 1e-6


class ConditionError(ValueError):
    """Branch switching refused because (S) or (T) fails at the candidate."""


class BranchSwitchError(RuntimeError):
    pass


class TheoryViolationError(RuntimeError):
    """A nonconstant solution left the detuning window of the nonexistence result."""


@dataclass(frozen=True)
class ContinuationConfig:
    ds_init: float = 0.02
    ds_min: float = 1e-6
    ds_max: float = 0.1
    max_steps: int = 2000
    trivial_return_tol: float = 1e-5
    corrector_tol: float = 1e-10
    corrector_max_iter: int = 10
    n: int = 256
    compute_min_eig: bool = True
    stop_on_return: bool = True

    def __post_init__(self):
        if not 0 < self.ds_min <= self.ds_init <= self.ds_max:
            raise ValueError("need 0 < ds_min <= ds_init <= ds_max")
        if self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")


@dataclass
class BranchPoint:
    """A converged point on a branch.

    ``tangent`` is the unit tangent in ``(coefficients, λ)`` space and
    ``ds`` the arclength step that produced the point (0 for the start).
    ``constraint`` records how the point was pinned: ``"arclength"``
    (pseudo-arclength along the previous tangent) or ``"amplitude"``
    (prescribed dominant-mode amplitude near a return to the constant
    solutions, where ``ds`` is the chord length).
    """

    param: float
    state: FieldState
    l2norm: float
    min_eig: float
    tangent: np.ndarray
    ds: float = 0.0
    det_sign: float = 0.0
    constraint: str = "arclength"

    @property
    def X(self) -> np.ndarray:
        return np.concatenate([self.state.coeffs, [self.param]])


@dataclass(frozen=True)
class Event:
    kind: str
    index: int
    param: float
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass
class Branch:
    mode: Mode
    fixed_param: float
    d: float
    origin: BifurcationCandidate | str | None
    points: list[BranchPoint] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)

    def parameters(self, param: float) -> Parameters:
        return _params(self.mode, self.d, self.fixed_param, param)

    @property
    def params(self) -> np.ndarray:
        return np.array([pt.param for pt in self.points])

    @property
    def l2norms(self) -> np.ndarray:
        return np.array([pt.l2norm for pt in self.points])

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    @property
    def terminated_by(self) -> str | None:
        for e in reversed(self.events):
            if e.kind in ("trivial_return", "step_limit"):
                return e.kind
        return None

    @property
    def failed(self) -> bool:
        return any(e.kind == "step_limit" and e.detail.get("reason") == "ds_min" for e in self.events)


def _params(mode: Mode, d: float, fixed: float, lam: float) -> Parameters:
    if mode == "hat":
        return Parameters(d=d, zeta=float(lam), f=fixed)
    return Parameters(d=d, zeta=fixed, f=float(lam))


# --------------------------------------------------------------------------
# the extended system


class _System:
    """Residual of ``(c, λ)`` with the arclength metric."""

    def __init__(self, mode: Mode, p: Parameters, grid: Grid):
        self.mode = mode
        self.d = p.d
        self.fixed = p.f if mode == "hat" else p.zeta
        self.grid = grid
        n = grid.n
        w = np.concatenate([grid.weights, grid.weights])
        self.w = np.concatenate([w, [1.0]])

    def params(self, lam: float) -> Parameters:
        return _params(self.mode, self.d, self.fixed, lam)

    def residual(self, X: np.ndarray) -> np.ndarray:
        return residual_coeffs(X[:-1], self.params(X[-1]), self.grid)

    def jac_c(self, X: np.ndarray) -> np.ndarray:
        return jacobian_coeffs(X[:-1], self.params(X[-1]), self.grid)

    def jac_lam(self, X: np.ndarray) -> np.ndarray:
        if self.mode == "hat":
            return -X[:-1]
        out = np.zeros(2 * self.grid.n)
        out[self.grid.n] = -1.0
        return out

    def res_norm(self, r: np.ndarray) -> float:
        return coeffs_norm(r, self.grid)

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(self.w * a * b))

    def norm(self, a: np.ndarray) -> float:
        return math.sqrt(self.dot(a, a))

    def state(self, X: np.ndarray) -> FieldState:
        return FieldState.from_coeffs(X[:-1], self.grid)

    def augmented(self, X: np.ndarray) -> np.ndarray:
        return np.column_stack([self.jac_c(X), self.jac_lam(X)])

    def solve_bordered(self, X, row, rhs_extra, residual, tol, max_iter):
        """Newton on ``R(X) = 0``, ``row·X = rhs_extra`` (``row`` already weighted)."""
        X = X.copy()
        for it in range(1, max_iter + 1):
            A = np.empty((X.size, X.size))
            A[:-1] = self.augmented(X)
            A[-1] = row
            g = np.concatenate([residual, [row @ X - rhs_extra]])
            dX, _ = lu_solve_checked(A, -g)
            X += dX
            residual = self.residual(X)
            rn = self.res_norm(residual)
            if not np.isfinite(rn):
                break
            if rn < tol and abs(row @ X - rhs_extra) < 1e-11 * max(1.0, abs(rhs_extra)) + tol:
                return X, it
        raise NewtonConvergenceError("bordered corrector did not converge", None)


def _det_sign(jac: np.ndarray) -> float:
    sign, _ = np.linalg.slogdet(jac)
    return float(sign)


def _make_point(
    sys: _System, X: np.ndarray, tangent: np.ndarray, ds: float, cfg: ContinuationConfig, constraint: str = "arclength"
) -> BranchPoint:
    state = sys.state(X)
    p = sys.params(X[-1])
    min_eig = min_eigenvalue(state, p) if cfg.compute_min_eig else float("nan")
    return BranchPoint(
        param=float(X[-1]),
        state=state,
        l2norm=l2norm_coeffs(X[:-1], sys.grid),
        min_eig=min_eig,
        tangent=tangent,
        ds=ds,
        det_sign=_det_sign(sys.jac_c(X)),
        constraint=constraint,
    )


def _null_tangent(sys: _System, X: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Unit tangent of the branch through ``X`` with ``⟨τ, direction⟩ > 0``."""
    A = np.empty((X.size, X.size))
    A[:-1] = sys.augmented(X)
    A[-1] = sys.w * direction
    rhs = np.zeros(X.size)
    rhs[-1] = 1.0
    tau = scipy.linalg.solve(A, rhs)
    return tau / sys.norm(tau)


# --------------------------------------------------------------------------
# branch switching


def _kernel_function(c: BifurcationCandidate, grid: Grid, sys: _System) -> np.ndarray:
    """``α cos(kx)`` normalized in L²(0, π), as an extended vector with zero λ part."""
    phi = np.zeros(2 * grid.n + 1)
    phi[c.k] = c.kernel.alpha[0]
    phi[grid.n + c.k] = c.kernel.alpha[1]
    return phi / sys.norm(phi)


def branch_switch(
    c: BifurcationCandidate,
    p: Parameters,
    eps: float = 1e-3,
    n: int = 256,
    tol: float = 1e-10,
    max_escalations: int = 4,
) -> BranchPoint:
    """First point of the nontrivial curve bifurcating at candidate ``c``.

    The predictor is the constant state plus ``eps·φ`` with
    ``φ = α cos(kx)/‖α cos(kx)‖``; the corrector solves the residual together
    with the pinning condition ``⟨u - u*, φ⟩ = eps``, which is orthogonal to
    the (constant) trivial tangent.  If the corrector falls back onto the
    constant state, ``eps`` is doubled, up to a total factor of ten.
    A negative ``eps`` gives the phase-shifted twin of the branch.

    Raises
    ------
    ConditionError
        When (S) or (T) fails at ``c``.
    BranchSwitchError
        When no nontrivial state is found.
    """
    if not c.s_ok or not c.t_ok:
        failed = [name for name, ok in (("(S)", c.s_ok), ("(T)", c.t_ok)) if not ok]
        raise ConditionError(f"condition {' and '.join(failed)} fails at k={c.k}, sigma={c.sigma}")
    if c.kernel is None:
        raise ConditionError("candidate has no kernel vectors")
    if eps == 0:
        raise ValueError("eps must be nonzero")
    grid = get_grid(n)
    base = p.with_active(c.mode, c.param)
    sys = _System(c.mode, base, grid)
    const = FieldState.constant(c.state, grid)
    X0 = np.concatenate([const.coeffs, [c.param]])
    phi = _kernel_function(c, grid, sys)
    row = sys.w * phi
    amp = eps
    limit = 10.0 * abs(eps)
    last_exc: Exception | None = None
    while abs(amp) <= limit * (1 + 1e-12):
        X = X0 + amp * phi
        try:
            X, _ = sys.solve_bordered(X, row, row @ X0 + amp, sys.residual(X), tol, 30)
        except (NewtonConvergenceError, SingularJacobianError) as exc:
            last_exc = exc
        else:
            state = sys.state(X)
            if state.nonconstant_amplitude() > 0.1 * abs(amp) * float(np.max(np.abs(phi))):
                direction = phi if amp > 0 else -phi
                tau = _null_tangent(sys, X, direction)
                return _make_point(sys, X, tau, 0.0, ContinuationConfig(n=n))
        amp *= 2.0
        if abs(amp) > limit:
            break
    raise BranchSwitchError(f"no nontrivial state found near k={c.k}, sigma={c.sigma}: {last_exc}")


# --------------------------------------------------------------------------
# distance to the trivial curve


def _sample_coords(mode: Mode, p: Parameters, lam: float, count: int) -> np.ndarray:
    if mode == "hat":
        # t = tanh θ spreads samples evenly in t/√(1-t²) = sinh θ
        top = math.asinh(abs(lam) + p.f * p.f + 10.0) + 1.0
        return np.tanh(np.linspace(-top, top, count))
    top = (abs(lam) + 1.0) ** (1.0 / 3.0) + math.sqrt(abs(p.zeta)) + 2.0
    return np.linspace(-top, top, count)


def _constants(mode: Mode, coords: np.ndarray, p: Parameters):
    """Vectorized trivial states ``(a1, a2, λ)`` for an array of coordinates."""
    if mode == "hat":
        w = 1.0 - coords * coords
        rw = np.sqrt(w)
        return p.f * w, -p.f * coords * rw, p.f * p.f * w + coords / rw
    q = coords * coords - p.zeta
    root = np.sqrt(1.0 + q * q)
    return coords / root, coords * q / root, coords * root


def distance_to_trivial(u: FieldState, p: Parameters, mode: Mode, samples: int = 10_000) -> tuple[float, float]:
    """Distance from ``(u, λ)`` to the curve of constant solutions.

    The distance to the constant state with coordinate ``c`` is
    ``max(‖u - a(c)‖∞, |λ(c) - λ|)``, so a constant state at the matched
    parameter value is at distance ``‖u - a(c)‖∞``.  The minimum over the
    curve is taken on ``samples`` coordinates and refined locally.

    Returns
    -------
    (distance, coord)
    """
    lam = p.active(mode)
    lo1, hi1 = float(u.a1.min()), float(u.a1.max())
    lo2, hi2 = float(u.a2.min()), float(u.a2.max())

    def dist(coords):
        b1, b2, lc = _constants(mode, np.atleast_1d(coords), p)
        # the sup over nodes of |u - b| is attained at the extreme values of each component
        d1 = np.maximum(np.abs(hi1 - b1), np.abs(lo1 - b1))
        d2 = np.maximum(np.abs(hi2 - b2), np.abs(lo2 - b2))
        return np.maximum(np.maximum(d1, d2), np.abs(lc - lam))

    coords = _sample_coords(mode, p, lam, samples)
    values = dist(coords)
    i = int(np.argmin(values))
    lo = coords[max(i - 1, 0)]
    hi = coords[min(i + 1, coords.size - 1)]
    best_c, best_v = float(coords[i]), float(values[i])
    if hi > lo:
        res = minimize_scalar(lambda c: float(dist(c)[0]), bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
        if res.fun < best_v:
            best_c, best_v = float(res.x), float(res.fun)
    return best_v, best_c


# --------------------------------------------------------------------------
# continuation


def _dominant_mode(c: np.ndarray, n: int) -> int:
    energy = c[1:n] ** 2 + c[n + 1 :] ** 2
    return 1 + int(np.argmax(energy))


def _nonconstant_norm(X: np.ndarray, sys: _System) -> float:
    c = X[:-1].copy()
    n = sys.grid.n
    c[0] = 0.0
    c[n] = 0.0
    return l2norm_coeffs(c, sys.grid)


def _mode_projection(X: np.ndarray, m: int, ref: np.ndarray, n: int) -> float:
    return float(X[m] * ref[0] + X[n + m] * ref[1])


class _Stepper:
    def __init__(self, sys: _System, cfg: ContinuationConfig):
        self.sys = sys
        self.cfg = cfg

    def step(self, X: np.ndarray, tau: np.ndarray, ds: float) -> tuple[np.ndarray, int]:
        sys = self.sys
        pred = X + ds * tau
        row = sys.w * tau
        Xn, iters = sys.solve_bordered(
            pred, row, row @ X + ds, sys.residual(pred), self.cfg.corrector_tol, self.cfg.corrector_max_iter
        )
        if sys.norm(Xn - X) > 2.0 * abs(ds):
            raise NewtonConvergenceError("corrector jumped", None)
        return Xn, iters


def _check_window(sys: _System, X: np.ndarray) -> None:
    p = sys.params(X[-1])
    if _nonconstant_norm(X, sys) <= NONCONSTANT_TOL:
        return
    if not bounds_report(p).in_window(p.zeta, p.d, slack=WINDOW_SLACK):
        b = bounds_report(p)
        raise TheoryViolationError(
            f"nonconstant solution at zeta={p.zeta:.6g}, f={p.f:.6g} outside "
            f"[{b.zeta_star_lo:.6g}, {b.zeta_star_hi:.6g}] by more than {WINDOW_SLACK}"
        )


def _nearest_candidate(mode: Mode, p: Parameters, lam: float, coord: float):
    cands = enumerate_bifpoints(mode, p)
    if not cands:
        return None
    return min(cands, key=lambda c: (abs(c.param - lam), abs(c.coord - coord)))


def _fold_param(points: list[BranchPoint], i: int) -> float:
    """Parabolic estimate of the extremal parameter near point ``i``."""
    if i <= 0 or i >= len(points) - 1:
        return points[i].param
    s0 = -points[i].ds
    s2 = points[i + 1].ds
    l0, l1, l2 = points[i - 1].param, points[i].param, points[i + 1].param
    # fit λ(s) = A s² + B s + l1 through (s0, l0), (0, l1), (s2, l2)
    den = s0 * s2 * (s0 - s2)
    if den == 0:
        return l1
    A = ((l0 - l1) * s2 - (l2 - l1) * s0) / den
    B = ((l2 - l1) * s0 * s0 - (l0 - l1) * s2 * s2) / den
    if A == 0:
        return l1
    s_star = -B / (2 * A)
    if not s0 <= s_star <= s2:
        return l1
    return l1 + B * s_star + A * s_star * s_star


def continue_branch(
    start: BranchPoint,
    p: Parameters,
    cfg: ContinuationConfig | None = None,
    mode: Mode | None = None,
    origin: BifurcationCandidate | str | None = None,
    callback: Callable[[BranchPoint], None] | None = None,
) -> Branch:
    """Follow the branch through ``start`` by pseudo-arclength continuation.

    ``mode`` defaults to the mode of ``origin`` when that is a candidate.
    ``p`` supplies ``d`` and the fixed parameter; its active parameter is
    ignored in favour of ``start.param``.

    Once the branch has moved away from the constant solutions and heads
    back towards them, the last stretch is followed with the amplitude of
    the dominant Fourier mode as parameter (pinned and reduced by a factor
    four per step), which approaches the bifurcation point on the trivial
    curve without the corrector sliding onto the trivial curve itself.

    Raises
    ------
    TheoryViolationError
        If a nonconstant state leaves the detuning window by more than one unit.
    """
    cfg = cfg or ContinuationConfig()
    if mode is None:
        if isinstance(origin, BifurcationCandidate):
            mode = origin.mode
        else:
            raise ValueError("mode is required when origin is not a candidate")
    grid = start.state.grid
    sys = _System(mode, p, grid)
    branch = Branch(mode=mode, fixed_param=sys.fixed, d=p.d, origin=origin, points=[start])
    stepper = _Stepper(sys, cfg)

    X = start.X
    tau = start.tangent.copy()
    ds = cfg.ds_init
    arm_level = 10.0 * _nonconstant_norm(X, sys)
    armed = False
    approach_blocked = 0
    steps = 0
    while True:
        if steps >= cfg.max_steps or len(branch.points) >= MAX_POINTS:
            _stop(branch, "max_steps")
            break
        amp = _nonconstant_norm(X, sys)
        prev_amp = _nonconstant_norm(branch.points[-2].X, sys) if len(branch.points) >= 2 else math.inf
        if armed and approach_blocked == 0 and amp < 4.0 * cfg.ds_max and amp < prev_amp:
            outcome = _approach_trivial(sys, cfg, branch, callback)
            if outcome == "returned":
                if cfg.stop_on_return:
                    break
                armed = False
            elif outcome == "max_steps":
                _stop(branch, "max_steps")
                break
            else:
                approach_blocked = 5
            X = branch.points[-1].X
            tau = branch.points[-1].tangent.copy()
            steps = len(branch.points) - 1
            continue
        approach_blocked = max(approach_blocked - 1, 0)
        if armed:
            # near the constants a full step can jump onto a neighbouring branch
            ds = max(min(ds, 0.5 * amp), cfg.ds_min)
        try:
            Xn, iters = stepper.step(X, tau, ds)
            if armed and _nonconstant_norm(Xn, sys) < 1e-3 * amp:
                raise NewtonConvergenceError("corrector collapsed onto the trivial curve", None)
        except (NewtonConvergenceError, SingularJacobianError):
            ds *= 0.5
            if ds < cfg.ds_min:
                _stop(branch, "ds_min")
                break
            continue
        steps += 1
        _check_window(sys, Xn)
        secant = (Xn - X) / sys.norm(Xn - X)
        _append(sys, cfg, branch, Xn, secant, ds, tau, callback)
        if not armed and _nonconstant_norm(Xn, sys) > arm_level:
            armed = True
        # step-size control on corrector effort
        if iters <= 3:
            ds = min(ds * 1.5, cfg.ds_max)
        elif iters >= 6:
            ds = max(ds * 0.5, cfg.ds_min)
        X, tau = Xn, secant
    return branch


def _stop(branch: Branch, reason: str) -> None:
    last = branch.points[-1]
    branch.events.append(Event("step_limit", len(branch.points) - 1, last.param, {"reason": reason}))


def _append(sys, cfg, branch, Xn, secant, ds, tau, callback, constraint="arclength") -> BranchPoint:
    """Store a new point and log turning points and determinant sign flips."""
    point = _make_point(sys, Xn, secant, ds, cfg, constraint)
    prev = branch.points[-1]
    branch.points.append(point)
    idx = len(branch.points) - 1
    if callback is not None:
        callback(point)
    turning = False
    # amplitude-pinned steps end with λ changes at rounding level; no fold there
    settled = constraint == "amplitude" and abs(point.param - prev.param) < 1e-10 * max(1.0, abs(prev.param))
    if idx >= 2 and tau[-1] != 0 and np.sign(secant[-1]) != np.sign(tau[-1]) and not settled:
        turning = True
        j = idx - 1
        branch.events.append(
            Event("turning_point", j, branch.points[j].param, {"refined_param": _fold_param(branch.points, j)})
        )
    if prev.det_sign != 0 and point.det_sign != 0 and prev.det_sign != point.det_sign and not turning:
        branch.events.append(
            Event(
                "secondary_bif_candidate",
                idx,
                point.param,
                {"min_eig_before": prev.min_eig, "min_eig_after": point.min_eig},
            )
        )
    return point


APPROACH_FACTOR = 0.25
APPROACH_FACTOR_MAX = 0.9


def _approach_trivial(sys, cfg, branch, callback) -> str:
    """Drive the dominant-mode amplitude to zero along the branch.

    Returns ``"returned"`` after logging a ``trivial_return`` event,
    ``"max_steps"`` if the step budget ran out, or ``"failed"`` when the
    branch does not head into the constant solutions (for instance at a
    secondary bifurcation where only the dominant mode vanishes).  A failed
    approach leaves the branch untouched.
    """
    n = sys.grid.n
    pts = branch.points
    n_points, n_events = len(pts), len(branch.events)
    X_prev, X = pts[-2].X, pts[-1].X
    m = _dominant_mode(X[:-1], n)
    ref = np.array([X[m], X[n + m]])
    ref /= np.hypot(*ref)
    row = np.zeros(X.size)
    row[m], row[n + m] = ref
    q_prev, q = row @ X_prev, row @ X
    amp = _nonconstant_norm(X, sys)

    def rollback(outcome, why=""):
        log.debug("approach to constants at λ=%.6g abandoned: %s", pts[-1].param, why or outcome)
        del pts[n_points:]
        del branch.events[n_events:]
        return outcome

    if not 0 < q < q_prev:
        log.debug("approach at λ=%.6g skipped: dominant amplitude not decreasing", pts[-1].param)
        return "failed"
    target_final = 0.2 * cfg.trivial_return_tol
    factor = APPROACH_FACTOR
    while True:
        if len(pts) - 1 >= cfg.max_steps or len(pts) >= MAX_POINTS:
            return rollback("max_steps")
        q_t = max(q * factor, target_final)
        # linear extrapolation in the amplitude
        pred = X + (q_t - q) / (q - q_prev) * (X - X_prev)
        try:
            Xn, _ = sys.solve_bordered(pred, row, q_t, sys.residual(pred), cfg.corrector_tol, cfg.corrector_max_iter)
        except (NewtonConvergenceError, SingularJacobianError) as exc:
            # a gentler reduction first; give up once steps become tiny
            factor = 1.0 - 0.5 * (1.0 - factor)
            if factor > APPROACH_FACTOR_MAX:
                return rollback("failed", f"corrector: {exc}")
            continue
        used, factor = factor, max(APPROACH_FACTOR, factor * factor)
        step = sys.norm(Xn - X)
        amp_new = _nonconstant_norm(Xn, sys)
        if step > 3.0 * sys.norm(pred - X) + 1e-9:
            return rollback("failed", "corrector left the branch")
        if amp_new > min(1.0, 2.0 * used) * amp + 10.0 * target_final:
            return rollback("failed", "other modes persist")
        _check_window(sys, Xn)
        tau = pts[-1].tangent
        secant = (Xn - X) / step
        _append(sys, cfg, branch, Xn, secant, step, tau, None, "amplitude")
        X_prev, X, q_prev, q, amp = X, Xn, q, q_t, amp_new
        if q_t <= target_final:
            break
    last = pts[-1]
    dist, coord = distance_to_trivial(last.state, sys.params(last.param), branch.mode)
    if dist >= cfg.trivial_return_tol:
        return rollback("failed", f"distance to constants {dist:.2e}")
    if callback is not None:
        for point in pts[n_points:]:
            callback(point)
    _log_return(sys, branch, X, dist, coord)
    return "returned"


def _log_return(sys, branch, Xs, dist, coord):
    p = sys.params(Xs[-1])
    idx = len(branch.points) - 1
    cand = _nearest_candidate(branch.mode, p, Xs[-1], coord)
    detail = {"distance": dist, "coord": coord}
    if cand is not None:
        detail.update(
            {
                "candidate_k": cand.k,
                "candidate_sigma": cand.sigma,
                "candidate_param": cand.param,
                "candidate_coord": cand.coord,
                "param_gap": float(abs(cand.param - Xs[-1])),
            }
        )
    branch.events.append(Event("trivial_return", idx, float(Xs[-1]), detail))
    return branch.events[-1]


# --------------------------------------------------------------------------
# secondary switching


def switch_secondary(branch: Branch, index: int, eps: float = 1e-3, tol: float = 1e-10) -> BranchPoint:
    """Start point of the secondary branch crossing ``branch`` near point ``index``.

    The crossing is localized by bisection on the sign of ``det R_c`` between
    points ``index-1`` and ``index``.  There the augmented Jacobian
    ``[R_c | R_λ]`` has a two-dimensional kernel; its right singular vector
    orthogonal to the branch tangent is used as predictor direction and the
    corrector pins ``⟨X - X*, ψ⟩ = eps``.
    """
    if not 1 <= index < len(branch.points):
        raise IndexError(f"point index {index} out of range")
    pts = branch.points
    grid = pts[index].state.grid
    p = branch.parameters(pts[index].param)
    sys = _System(branch.mode, p, grid)
    cfg = ContinuationConfig(n=grid.n, compute_min_eig=False)
    stepper = _Stepper(sys, cfg)
    X0 = pts[index - 1].X
    tau = pts[index].tangent
    lo, hi = 0.0, pts[index].ds
    s0 = pts[index - 1].det_sign
    Xb = pts[index].X
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        try:
            Xm, _ = stepper.step(X0, tau, mid)
        except (NewtonConvergenceError, SingularJacobianError):
            break
        Xb = Xm
        if _det_sign(sys.jac_c(Xm)) == s0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    A = sys.augmented(Xb) * np.sqrt(sys.w)[None, :] ** -1
    _, _, vt = np.linalg.svd(A)
    basis = vt[-2:].T / np.sqrt(sys.w)[:, None]
    t_hat = tau / sys.norm(tau)
    best = None
    for j in range(2):
        v = basis[:, j] - sys.dot(basis[:, j], t_hat) * t_hat
        nv = sys.norm(v)
        if best is None or nv > best[1]:
            best = (v, nv)
    psi = best[0] / best[1]
    row = sys.w * psi
    X = Xb + eps * psi
    Xs, _ = sys.solve_bordered(X, row, row @ Xb + eps, sys.residual(X), tol, 30)
    tangent = _null_tangent(sys, Xs, psi)
    return _make_point(sys, Xs, tangent, 0.0, ContinuationConfig(n=grid.n))


def start_from_state(state: FieldState, p: Parameters, mode: Mode, direction: np.ndarray | None = None) -> BranchPoint:
    """Converge ``state`` at ``p`` and wrap it as a branch start point.

    The tangent is oriented along ``direction`` (extended vector) or, by
    default, towards increasing active parameter.
    """
    from .spectral import newton_solve

    u = newton_solve(state, p)
    sys = _System(mode, p, u.grid)
    X = np.concatenate([u.coeffs, [p.active(mode)]])
    if direction is None:
        direction = np.zeros_like(X)
        direction[-1] = 1.0
    tau = _null_tangent(sys, X, direction)
    return _make_point(sys, X, tau, 0.0, ContinuationConfig(n=u.n))


def arclength_defects(branch: Branch) -> np.ndarray:
    """Constraint defect of every point after the first.

    For pseudo-arclength points this is ``⟨X_i - X_{i-1}, τ_{i-1}⟩ - ds_i`` in
    the weighted metric; for amplitude-pinned points ``‖X_i - X_{i-1}‖ - ds_i``.
    """
    if len(branch.points) < 2:
        return np.zeros(0)
    sys = _System(branch.mode, branch.parameters(branch.points[0].param), branch.points[0].state.grid)
    out = []
    for prev, pt in zip(branch.points, branch.points[1:]):
        dX = pt.X - prev.X
        if pt.constraint == "amplitude":
            out.append(sys.norm(dX) - pt.ds)
        else:
            out.append(sys.dot(dX, prev.tangent) - pt.ds)
    return np.array(out)


def trivial_l2norm(mode: Mode, coord: float, p: Parameters) -> float:
    """L²(0, π) norm of the constant state at ``coord``: ``√π·|a|``."""
    s = trivial_state(mode, coord, p)
    return math.sqrt(math.pi * s.abs2)
