"""Cosine-Galerkin discretization of the Neumann problem on ``[0, π]``.

A synchronized solution is even about ``0`` and ``π``, so it is expanded as
``a(x) = Σ_{m<n} c_m cos(mx)`` with the Neumann conditions built into the
basis.  States are stored by their values at the ``n`` nodes
``x_j = jπ/(n-1)``; the DCT-I maps between values and coefficients exactly.

The cubic term is projected onto the first ``n`` modes exactly by forming
products on a fine grid of ``2n+1`` nodes.  A 3/2 padding only removes the
aliasing of quadratic products, so the fine grid is twice as dense.  The
Newton iteration, Jacobian and eigenvalue computations all work in
coefficient space; norms reported to the user are taken over node values.

The residual is ``R(a) = d a'' + F(a)`` with::

    F1 = -a2 - ζ a1 + |a|² a1
    F2 =  a1 - ζ a2 + |a|² a2 - f

so ``u = 0`` gives ``(0, -f)`` and the linearized operator
``φ ↦ -dφ'' - N(a, ζ)φ`` is ``-R'(a)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft
import scipy.linalg
from scipy.linalg import lapack
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs

from . import kernels
from .model import BoundsReport, ConstantState, Parameters, bounds_report

DEFAULT_N = 256
MIN_N = 16


class NewtonConvergenceError(RuntimeError):
    """Newton's method did not reach the tolerance; ``report`` holds the history."""

    def __init__(self, message: str, report: "NewtonReport"):
        super().__init__(message)
        self.report = report


class SingularJacobianError(RuntimeError):
    """The Jacobian is numerically rank deficient (expected at bifurcation points)."""


class EigenSolverError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# grid and transforms


@dataclass(frozen=True)
class Grid:
    """``n`` equispaced nodes on ``[0, π]`` including both endpoints."""

    n: int = DEFAULT_N

    def __post_init__(self):
        n = int(self.n)
        if n < MIN_N or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= {MIN_N}, got {self.n}")

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, math.pi, self.n)

    @cached_property
    def modes(self) -> np.ndarray:
        return np.arange(self.n, dtype=float)

    @property
    def n_fine(self) -> int:
        """Size of the product grid; exact Galerkin projection of cubic terms."""
        return 2 * self.n + 1

    @cached_property
    def weights(self) -> np.ndarray:
        """L²(0, π) Gram weights of the cosine basis (π for m = 0, π/2 otherwise)."""
        w = np.full(self.n, math.pi / 2)
        w[0] = math.pi
        return w

    def to_coeffs(self, values: np.ndarray) -> np.ndarray:
        return values_to_coeffs(values)

    def to_values(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs_to_values(coeffs)

    def fine_values(self, coeffs: np.ndarray) -> np.ndarray:
        """Values on the fine grid of the cosine series with the given coefficients."""
        padded = np.zeros((self.n_fine,) + coeffs.shape[1:])
        padded[: self.n] = coeffs
        return coeffs_to_values(padded)

    def project(self, fine: np.ndarray) -> np.ndarray:
        """First ``n`` cosine coefficients of a fine-grid function."""
        return values_to_coeffs(fine)[: self.n]


@lru_cache(maxsize=8)
def get_grid(n: int = DEFAULT_N) -> Grid:
    return Grid(n)


def values_to_coeffs(values: np.ndarray) -> np.ndarray:
    """Cosine coefficients ``c`` with ``v(x_j) = Σ c_m cos(m x_j)`` (exact, DCT-I)."""
    values = np.asarray(values, dtype=float)
    c = scipy.fft.dct(values, type=1, axis=0) / (values.shape[0] - 1)
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def coeffs_to_values(coeffs: np.ndarray) -> np.ndarray:
    y = np.array(coeffs, dtype=float, copy=True)
    y[1:-1] *= 0.5
    return scipy.fft.dct(y, type=1, axis=0)


# --------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class FieldState:
    """Node values of ``(a1, a2)`` on ``grid``."""

    a1: np.ndarray
    a2: np.ndarray
    grid: Grid = field(default_factory=get_grid)

    def __post_init__(self):
        a1 = np.array(self.a1, dtype=float)
        a2 = np.array(self.a2, dtype=float)
        if a1.shape != (self.grid.n,) or a2.shape != (self.grid.n,):
            raise ValueError(f"field arrays must have shape ({self.grid.n},)")
        a1.setflags(write=False)
        a2.setflags(write=False)
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)

    @classmethod
    def from_coeffs(cls, coeffs: np.ndarray, grid: Grid) -> "FieldState":
        """Build from the stacked coefficient vector ``[c1; c2]`` of length ``2n``."""
        n = grid.n
        v = coeffs_to_values(np.asarray(coeffs, dtype=float).reshape(2, n).T)
        return cls(v[:, 0], v[:, 1], grid)

    @classmethod
    def constant(cls, a, grid: Grid | None = None) -> "FieldState":
        grid = grid or get_grid()
        if isinstance(a, ConstantState):
            a = a.a
        return cls(np.full(grid.n, float(a[0])), np.full(grid.n, float(a[1])), grid)

    @classmethod
    def zeros(cls, grid: Grid | None = None) -> "FieldState":
        return cls.constant((0.0, 0.0), grid)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @cached_property
    def coeffs(self) -> np.ndarray:
        """Stacked cosine coefficients ``[c1; c2]``."""
        c = values_to_coeffs(np.column_stack([self.a1, self.a2]))
        return np.concatenate([c[:, 0], c[:, 1]])

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.a1, self.a2])

    @property
    def complex(self) -> np.ndarray:
        return self.a1 + 1j * self.a2

    @property
    def abs(self) -> np.ndarray:
        return np.hypot(self.a1, self.a2)

    @cached_property
    def l2norm(self) -> float:
        """``‖a‖_{L²(0,π)}``, exact for the cosine series."""
        return l2norm_coeffs(self.coeffs, self.grid)

    def sup_norm(self) -> float:
        """``max |a|`` sampled on the fine grid."""
        c = self.coeffs.reshape(2, self.n).T
        fine = self.grid.fine_values(c)
        return float(np.max(np.hypot(fine[:, 0], fine[:, 1])))

    def nonconstant_amplitude(self) -> float:
        """Largest coefficient magnitude outside mode 0."""
        c = self.coeffs.reshape(2, self.n)
        return float(np.max(np.abs(c[:, 1:])))

    def shifted(self, shift_over_pi: float) -> "FieldState":
        """The state ``x ↦ a(x + s)`` with ``s = shift_over_pi·π`` (integer multiples only)."""
        # for s = π·(j) with j integer every mode m picks up (-1)^{mj}
        j = int(round(shift_over_pi))
        sign = (-1.0) ** (self.grid.modes * j)
        c = self.coeffs.reshape(2, self.n) * sign
        return FieldState.from_coeffs(c.ravel(), self.grid)

    def half_period_shift(self, k: int) -> "FieldState":
        """The state ``x ↦ a(x + π/k)`` of a ``2π/k``-periodic state.

        Mode ``jk`` picks up ``(-1)^j``.  Content off the multiples of ``k``
        has no even image under this shift and must be absent.
        """
        if k < 1:
            raise ValueError("k must be positive")
        m = self.grid.modes
        c = self.coeffs.reshape(2, self.n)
        off = m % k != 0
        if np.any(np.abs(c[:, off]) > 1e-9 * max(1.0, float(np.max(np.abs(c))))):
            raise ValueError(f"state is not 2π/{k}-periodic")
        sign = np.where(off, 0.0, (-1.0) ** (m // k))
        return FieldState.from_coeffs((c * sign).ravel(), self.grid)

    def allclose(self, other: "FieldState", atol: float = 1e-12) -> bool:
        return self.grid == other.grid and bool(
            np.allclose(self.a1, other.a1, rtol=0, atol=atol)
            and np.allclose(self.a2, other.a2, rtol=0, atol=atol)
        )


def l2norm_coeffs(coeffs: np.ndarray, grid: Grid) -> float:
    c = np.asarray(coeffs).reshape(2, grid.n)
    return float(math.sqrt(np.sum(grid.weights * (c[0] ** 2 + c[1] ** 2))))


def inner_coeffs(u: np.ndarray, v: np.ndarray, grid: Grid) -> float:
    """L²(0, π) inner product of two stacked coefficient vectors."""
    w = np.concatenate([grid.weights, grid.weights])
    return float(np.sum(w * u * v))


def mode_function(grid: Grid, alpha, k: int, scale: float = 1.0) -> np.ndarray:
    """Stacked coefficients of ``scale·α cos(kx)``."""
    c = np.zeros(2 * grid.n)
    c[k] = scale * alpha[0]
    c[grid.n + k] = scale * alpha[1]
    return c


# --------------------------------------------------------------------------
# residual and Jacobian


def _split(coeffs: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    return coeffs[:n], coeffs[n:]


def _cubic_terms(coeffs: np.ndarray, grid: Grid):
    """Fine-grid values of ``a1``, ``a2`` and ``|a|²``."""
    c1, c2 = _split(coeffs, grid.n)
    fine = grid.fine_values(np.column_stack([c1, c2]))
    a1, a2 = fine[:, 0], fine[:, 1]
    return a1, a2, a1 * a1 + a2 * a2


def residual_coeffs(coeffs: np.ndarray, p: Parameters, grid: Grid) -> np.ndarray:
    """Galerkin residual ``[R1; R2]`` in coefficient space."""
    n = grid.n
    c1, c2 = _split(coeffs, n)
    a1, a2, r = _cubic_terms(coeffs, grid)
    cub = grid.project(np.column_stack([r * a1, r * a2]))
    lin = -p.d * grid.modes**2 - p.zeta
    out = np.empty(2 * n)
    out[:n] = lin * c1 - c2 + cub[:, 0]
    out[n:] = lin * c2 + c1 + cub[:, 1]
    out[n] -= p.f
    return out


def coeffs_norm(res: np.ndarray, grid: Grid) -> float:
    """Max-norm over nodes of a stacked coefficient vector."""
    v = coeffs_to_values(res.reshape(2, grid.n).T)
    return float(np.max(np.abs(v)))


def residual(u: FieldState, p: Parameters) -> np.ndarray:
    """Residual at the nodes, ``[R1(x_j); R2(x_j)]`` (length ``2n``)."""
    res = residual_coeffs(u.coeffs, p, u.grid)
    v = coeffs_to_values(res.reshape(2, u.n).T)
    return np.concatenate([v[:, 0], v[:, 1]])


def residual_norm(u: FieldState, p: Parameters) -> float:
    return float(np.max(np.abs(residual(u, p))))


def jacobian_coeffs(coeffs: np.ndarray, p: Parameters, grid: Grid) -> np.ndarray:
    """Dense ``2n × 2n`` derivative of :func:`residual_coeffs` in ``coeffs``."""
    n = grid.n
    a1, a2, r = _cubic_terms(coeffs, grid)
    # quadratic coefficients reach mode 2n-2, which the fine grid resolves exactly
    g = values_to_coeffs(np.column_stack([r + 2 * a1 * a1, 2 * a1 * a2, r + 2 * a2 * a2]))
    g11 = kernels.cosine_product_matrix(g[:, 0], n)
    g12 = kernels.cosine_product_matrix(g[:, 1], n)
    g22 = kernels.cosine_product_matrix(g[:, 2], n)
    lin = -p.d * grid.modes**2 - p.zeta
    idx = np.arange(n)
    jac = np.empty((2 * n, 2 * n))
    jac[:n, :n] = g11
    jac[:n, n:] = g12
    jac[n:, :n] = g12
    jac[n:, n:] = g22
    jac[idx, idx] += lin
    jac[n + idx, n + idx] += lin
    jac[idx, n + idx] -= 1.0
    jac[n + idx, idx] += 1.0
    return jac


def jacobian(u: FieldState, p: Parameters) -> np.ndarray:
    return jacobian_coeffs(u.coeffs, p, u.grid)


def jvp(u: FieldState, p: Parameters, v: FieldState) -> np.ndarray:
    """Directional derivative ``R'(u)v`` at the nodes."""
    dc = jacobian(u, p) @ v.coeffs
    vals = coeffs_to_values(dc.reshape(2, u.n).T)
    return np.concatenate([vals[:, 0], vals[:, 1]])


def second_derivative(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral ``v''`` at the nodes for node values ``v`` (Neumann series)."""
    c = values_to_coeffs(values)
    m2 = grid.modes**2
    return coeffs_to_values(-(m2.reshape((-1,) + (1,) * (c.ndim - 1))) * c)


@dataclass(frozen=True)
class LinearizedOperator:
    """Matrix of ``φ ↦ -dφ'' - N(a, ζ)φ`` acting on stacked cosine coefficients."""

    matrix: np.ndarray
    grid: Grid

    @classmethod
    def at(cls, u: FieldState, p: Parameters) -> "LinearizedOperator":
        return cls(-jacobian(u, p), u.grid)

    def apply(self, phi: FieldState) -> np.ndarray:
        """Node values of the image of ``phi``."""
        out = self.matrix @ phi.coeffs
        v = coeffs_to_values(out.reshape(2, self.grid.n).T)
        return np.concatenate([v[:, 0], v[:, 1]])


# --------------------------------------------------------------------------
# Newton


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residual_norm: float
    history: list[float]
    steps: list[float]

    def summary(self) -> str:
        state = "converged" if self.converged else "did not converge"
        return f"Newton {state} after {self.iterations} iterations, residual {self.residual_norm:.3e}"


RCOND_MIN = 1e-14


def lu_solve_checked(mat: np.ndarray, rhs: np.ndarray):
    """Solve ``mat·x = rhs`` by LU; raise :class:`SingularJacobianError` if rank deficient.

    Returns ``(x, lu_piv)`` so callers can reuse the factorization.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            lu, piv = scipy.linalg.lu_factor(mat, check_finite=True)
        except (scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as exc:
            raise SingularJacobianError(f"Jacobian factorization failed: {exc}") from exc
    anorm = float(np.max(np.sum(np.abs(mat), axis=0)))
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or not rcond > RCOND_MIN:
        raise SingularJacobianError(f"Jacobian is numerically singular (rcond={rcond:.2e})")
    return scipy.linalg.lu_solve((lu, piv), rhs), (lu, piv)


def newton_solve(
    u0: FieldState,
    p: Parameters,
    tol: float = 1e-10,
    max_iter: int = 25,
    full_output: bool = False,
):
    """Damped Newton iteration for ``R(u) = 0`` at fixed parameters.

    Parameters
    ----------
    u0 : FieldState
        Initial guess; must be finite.
    tol : float
        Target max-norm of the nodal residual.
    max_iter : int
        Number of Jacobian solves allowed.
    full_output : bool
        Also return the :class:`NewtonReport`.

    Raises
    ------
    NewtonConvergenceError
        Tolerance not reached; carries the iteration report.
    SingularJacobianError
        The Jacobian is numerically singular at an iterate.
    """
    if not (np.all(np.isfinite(u0.a1)) and np.all(np.isfinite(u0.a2))):
        raise ValueError("initial guess contains non-finite values")
    grid = u0.grid
    c = u0.coeffs.copy()
    res = residual_coeffs(c, p, grid)
    rn = coeffs_norm(res, grid)
    history, steps = [rn], []
    it = 0
    while rn >= tol and it < max_iter:
        it += 1
        delta, _ = lu_solve_checked(jacobian_coeffs(c, p, grid), -res)
        lam = 1.0
        while True:
            trial = c + lam * delta
            tres = residual_coeffs(trial, p, grid)
            tn = coeffs_norm(tres, grid)
            if np.isfinite(tn) and tn <= (1.0 - 1e-4 * lam) * rn:
                break
            lam *= 0.5
            if lam < 2.0**-20:
                break
        if lam < 2.0**-20:
            report = NewtonReport(False, it, rn, history, steps)
            raise NewtonConvergenceError(
                f"line search failed at iteration {it}, residual {rn:.3e}", report
            )
        c, res, rn = trial, tres, tn
        history.append(rn)
        steps.append(lam)
    report = NewtonReport(rn < tol, it, rn, history, steps)
    if not report.converged:
        raise NewtonConvergenceError(report.summary(), report)
    u = FieldState.from_coeffs(c, grid)
    return (u, report) if full_output else u


# --------------------------------------------------------------------------
# eigenvalues of the linearization


EIGEN_SHIFT = 1e-9


def eigen_indicator(u: FieldState, p: Parameters, m: int = 6, return_vectors: bool = False):
    """The ``m`` eigenvalues of the linearized operator closest to zero.

    Computed by ARPACK in shift-invert mode around a tiny shift, with a
    dense fallback if ARPACK fails.  Eigenvalues are sorted by magnitude;
    with ``return_vectors`` the matching coefficient-space eigenvectors are
    returned as columns.
    """
    if not 1 <= m <= 10:
        raise ValueError("m must lie in 1..10")
    mat = LinearizedOperator.at(u, p).matrix
    return _smallest_eigs(mat, m, return_vectors)


def _smallest_eigs(mat: np.ndarray, m: int, return_vectors: bool):
    # fixed start vector: ARPACK otherwise draws a random one and results differ in the last bits
    v0 = np.random.default_rng(0).standard_normal(mat.shape[0])
    try:
        vals, vecs = eigs(mat, k=m, sigma=EIGEN_SHIFT, which="LM", tol=1e-13, maxiter=5000, v0=v0)
    except (ArpackError, ArpackNoConvergence, RuntimeError, ValueError) as exc:
        try:
            vals, vecs = scipy.linalg.eig(mat)
        except scipy.linalg.LinAlgError as exc2:  # pragma: no cover
            raise EigenSolverError(f"eigenvalue iteration failed: {exc}; dense fallback: {exc2}")
    order = np.argsort(np.abs(vals))[:m]
    vals, vecs = vals[order], vecs[:, order]
    return (vals, vecs) if return_vectors else vals


def min_eigenvalue(u: FieldState, p: Parameters) -> float:
    """Real part of the eigenvalue of smallest magnitude (a signed scalar indicator)."""
    return float(eigen_indicator(u, p, m=1)[0].real)


def mode_correlation(vec: np.ndarray, alpha, k: int, grid: Grid) -> float:
    """``|⟨v, α cos kx⟩| / (‖v‖ ‖α cos kx‖)`` in L²(0, π), for a possibly complex ``v``."""
    w = np.concatenate([grid.weights, grid.weights])
    target = mode_function(grid, alpha, k)
    num = abs(np.sum(w * np.conj(vec) * target))
    den = math.sqrt(np.sum(w * np.abs(vec) ** 2) * np.sum(w * target**2))
    return float(num / den) if den > 0 else 0.0


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the a posteriori checks on a (supposedly) converged state.

    Identity defects are absolute; ``*_scale`` is the size of the largest
    term in each identity so relative defects can be formed.
    """

    residual_norm: float
    mean_defect: float
    mean_scale: float
    energy_defect: float
    energy_scale: float
    linf: float
    linf_bound: float
    nonconstant: bool
    zeta_window: tuple[float, float]
    signed_zeta: float
    identity_tol: float = 1e-8
    residual_tol: float = 1e-8

    @property
    def residual_ok(self) -> bool:
        return self.residual_norm < self.residual_tol

    @property
    def mean_ok(self) -> bool:
        return self.mean_defect <= self.identity_tol * max(1.0, self.mean_scale)

    @property
    def energy_ok(self) -> bool:
        return self.energy_defect <= self.identity_tol * max(1.0, self.energy_scale)

    @property
    def bound_ok(self) -> bool:
        return self.linf <= self.linf_bound * (1.0 + 1e-12)

    @property
    def window_ok(self) -> bool:
        if not self.nonconstant:
            return True
        lo, hi = self.zeta_window
        return lo <= self.signed_zeta <= hi

    @property
    def ok(self) -> bool:
        return self.residual_ok and self.mean_ok and self.energy_ok and self.bound_ok and self.window_ok

    @property
    def theory_violation(self) -> bool:
        """A converged state breaking the a priori bound or window points to a bug."""
        return self.residual_ok and not (self.bound_ok and self.window_ok)

    def failures(self) -> list[str]:
        names = ["residual_ok", "mean_ok", "energy_ok", "bound_ok", "window_ok"]
        return [name for name in names if not getattr(self, name)]

    def as_dict(self) -> dict:
        return {
            "residual_norm": self.residual_norm,
            "mean_defect": self.mean_defect,
            "mean_scale": self.mean_scale,
            "energy_defect": self.energy_defect,
            "energy_scale": self.energy_scale,
            "linf": self.linf,
            "linf_bound": self.linf_bound,
            "nonconstant": self.nonconstant,
            "zeta_window": list(self.zeta_window),
            "signed_zeta": self.signed_zeta,
            "ok": self.ok,
        }


NONCONSTANT_TOL = 1e-8


def identity_terms(u: FieldState, p: Parameters) -> dict:
    """Integrals over the 2π-periodic even extension entering both identities.

    All integrals are exact for the cosine series (twice the ``[0, π]`` values).
    """
    grid = u.grid
    n = grid.n
    c = u.coeffs.reshape(2, n)
    w = grid.weights
    a1, a2, r = _cubic_terms(u.coeffs, grid)
    rhat = values_to_coeffs(r)  # exact: |a|² has modes up to 2n-2
    wf = np.full(rhat.shape[0], math.pi / 2)
    wf[0] = math.pi
    l2sq = float(np.sum(w * (c[0] ** 2 + c[1] ** 2)))
    l4 = float(np.sum(wf * rhat**2))
    grad = float(np.sum(w * grid.modes**2 * (c[0] ** 2 + c[1] ** 2)))
    int_a1 = math.pi * c[0, 0]
    int_a2 = math.pi * c[1, 0]
    return {
        "l2sq": 2 * l2sq,
        "l4": 2 * l4,
        "grad": 2 * grad,
        "int_a1": 2 * int_a1,
        "int_a2": 2 * int_a2,
    }


def validate_solution(
    u: FieldState,
    p: Parameters,
    bounds: BoundsReport | None = None,
    identity_tol: float = 1e-8,
) -> ValidationReport:
    """Check the integral identities, the L∞ bound and the detuning window.

    Mean identity ``∫(|a|² - f a1) = 0`` and energy identity
    ``d‖a'‖² = -ζ‖a‖² + ‖a‖₄⁴ - f∫a2`` over the even 2π extension.
    Violations are reported, never raised.
    """
    bounds = bounds or bounds_report(p)
    t = identity_terms(u, p)
    mean_terms = (t["l2sq"], p.f * t["int_a1"])
    energy_terms = (p.d * t["grad"], p.zeta * t["l2sq"], t["l4"], p.f * t["int_a2"])
    mean_defect = abs(mean_terms[0] - mean_terms[1])
    energy_defect = abs(energy_terms[0] + energy_terms[1] - energy_terms[2] + energy_terms[3])
    return ValidationReport(
        residual_norm=residual_norm(u, p),
        mean_defect=mean_defect,
        mean_scale=max(abs(x) for x in mean_terms),
        energy_defect=energy_defect,
        energy_scale=max(abs(x) for x in energy_terms),
        linf=u.sup_norm(),
        linf_bound=bounds.linf_bound,
        nonconstant=u.nonconstant_amplitude() > NONCONSTANT_TOL,
        zeta_window=(bounds.zeta_star_lo, bounds.zeta_star_hi),
        signed_zeta=p.sign_d * p.zeta,
        identity_tol=identity_tol,
    )
