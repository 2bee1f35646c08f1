import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from llecomb import evolution as evo
from llecomb.model import Parameters, constant_at
from llecomb.spectral import FieldState, get_grid

from conftest import cached_branch


def random_state(n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    g = get_grid(n)
    m = np.tile(np.arange(n), 2)
    return FieldState.from_coeffs(scale * rng.standard_normal(2 * n) * np.exp(-m / 3), g)


# --------------------------------------------------------------------------
# ramp schedules


def test_plateau_ramp_knots():
    r = evo.RampSchedule.plateau_ramp()
    assert r.T == 1000.0
    assert r(0.0) == -5.0 and r(1000 / 30) == -5.0
    assert r(1000 / 3) == pytest.approx(2.67, abs=1e-15)
    assert r(1000.0) == pytest.approx(2.67, abs=1e-15)
    mid = 0.5 * (1000 / 30 + 1000 / 3)
    assert r(mid) == pytest.approx(0.5 * (-5 + 2.67), abs=1e-12)


def test_ramp_is_continuous():
    r = evo.RampSchedule.plateau_ramp(T=30.0)
    t = np.linspace(0, 30, 30001)
    assert np.max(np.abs(np.diff(r(t)))) < 1e-2


@pytest.mark.parametrize("times, values", [((0, 1, 1), (0, 1, 2)), ((0, 2, 1), (0, 1, 2)), ((0, 1), (0,)), ((), ())])
def test_ramp_rejects_bad_knots(times, values):
    with pytest.raises(ValueError):
        evo.RampSchedule(times, values)


# --------------------------------------------------------------------------
# substeps


def test_zero_state_without_forcing_is_fixed():
    u = FieldState.zeros(get_grid(32))
    v = evo.strang_step(u, 0.1, Parameters(d=0.3, zeta=1.0, f=0.0))
    assert np.all(v.a1 == 0) and np.all(v.a2 == 0)


def test_kerr_step_keeps_modulus():
    u = random_state(64, 0)
    v = evo.kerr_step(u, 0.37)
    assert np.max(np.abs(v.abs - u.abs)) < 1e-14
    assert not np.allclose(v.a1, u.a1)


def test_linear_half_step_decay_of_mode_one():
    g = get_grid(64)
    u = FieldState(np.cos(g.x), np.zeros(64), g)
    dt = 0.01
    p = Parameters(d=1.0, zeta=0.0, f=0.0)
    v = evo.linear_half_step(u, dt, p)
    assert np.max(np.abs(v.abs - math.exp(-dt / 2) * np.abs(np.cos(g.x)))) < 1e-14
    # independent check: the mode-1 coefficient obeys c' = -(1 + i d) c
    sol = solve_ivp(lambda t, y: [-y[0] + y[1], -y[1] - y[0]], (0, dt / 2), [1.0, 0.0], rtol=1e-13, atol=1e-15)
    c = evo.complex_coefficients(v)[1] * 2
    assert c.real == pytest.approx(sol.y[0, -1], abs=1e-12)
    assert c.imag == pytest.approx(sol.y[1, -1], abs=1e-12)


def test_forcing_enters_mean_exactly():
    # with d irrelevant for constants the mean obeys c' = -(1 + iζ)c + f
    g = get_grid(32)
    p = Parameters(d=0.2, zeta=0.7, f=1.3)
    c0 = 0.4 - 0.2j
    u = FieldState(np.full(32, c0.real), np.full(32, c0.imag), g)
    h = 0.05
    v = evo.linear_half_step(u, 2 * h, p)
    lam = -(1 + 1j * p.zeta)
    want = c0 * np.exp(lam * h) + p.f * (np.exp(lam * h) - 1) / lam
    assert np.allclose(v.complex, want, atol=1e-15)


def test_linear_flow_decays_norm_exactly():
    u = random_state(64, 1)
    p = Parameters(d=0.1, zeta=2.0, f=0.0)
    v = evo.linear_half_step(u, 0.2, p)
    assert v.l2norm == pytest.approx(math.exp(-0.1) * u.l2norm, rel=1e-13)


def test_conservative_core_is_reversible():
    u = random_state(64, 2)
    p = Parameters(d=0.1, zeta=1.5, f=0.0)
    v = evo.strang_step(evo.strang_step(u, 0.01, p, damping=False), -0.01, p, damping=False)
    assert u.allclose(v, atol=1e-10)


def test_negative_step_needs_conservative_case():
    u = random_state(32, 3)
    with pytest.raises(ValueError):
        evo.strang_step(u, -0.01, Parameters(d=0.1, zeta=1.0, f=0.0))
    with pytest.raises(ValueError):
        evo.strang_step(u, -0.01, Parameters(d=0.1, zeta=1.0, f=1.0), damping=False)


def test_fused_run_matches_single_steps():
    u = random_state(32, 4, 0.5)
    p = Parameters(d=0.1, zeta=1.0, f=1.6)
    ramp = evo.RampSchedule.constant(1.0, 0.05)
    tr = evo.evolve(u, ramp, p, dt=0.01, sample_every=5)
    v = u
    for _ in range(5):
        v = evo.strang_step(v, 0.01, p)
    assert tr.final.allclose(v, atol=1e-13)


def test_zeta_is_frozen_at_midpoints():
    u = random_state(32, 5, 0.5)
    p = Parameters(d=0.1, f=1.6)
    ramp = evo.RampSchedule((0.0, 1.0), (0.0, 1.0))
    tr = evo.evolve(u, ramp, p, dt=0.25, sample_every=4)
    v = u
    for t in (0.125, 0.375, 0.625, 0.875):
        v = evo.strang_step(v, 0.25, Parameters(d=0.1, zeta=t, f=1.6))
    assert tr.final.allclose(v, atol=1e-13)


# --------------------------------------------------------------------------
# evolve


def test_evolve_is_deterministic_per_seed():
    g = get_grid(64)
    p = Parameters(d=0.1, f=1.6)
    u0 = FieldState.constant(constant_at("hat", p.with_active("hat", -5.0))[0], g)
    ramp = evo.RampSchedule.plateau_ramp(T=3.0)
    a = evo.evolve(u0, ramp, p, dt=1e-2, sample_every=10, noise_amp=1e-3, seed=7)
    b = evo.evolve(u0, ramp, p, dt=1e-2, sample_every=10, noise_amp=1e-3, seed=7)
    c = evo.evolve(u0, ramp, p, dt=1e-2, sample_every=10, noise_amp=1e-3, seed=8)
    assert np.array_equal(a.l2norm, b.l2norm) and np.array_equal(a.final.a1, b.final.a1)
    assert not np.array_equal(a.final.a1, c.final.a1)
    assert a.t[0] == 0 and a.t[-1] == pytest.approx(3.0) and len(a.t) == 31
    assert a.zeta[0] == -5.0 and a.zeta[-1] == pytest.approx(2.67)


def test_noise_is_uniform_and_bounded():
    u = FieldState.zeros(get_grid(256))
    v = evo.add_noise(u, 1e-3, seed=0)
    assert np.max(np.abs(v.values)) <= 1e-3
    assert np.std(v.values) == pytest.approx(1e-3 / math.sqrt(3), rel=0.1)
    assert evo.add_noise(u, 0.0, 0) is u


def test_evolve_validates_step_counts():
    u = FieldState.zeros(get_grid(32))
    p = Parameters(d=0.1, f=1.0)
    with pytest.raises(ValueError):
        evo.evolve(u, evo.RampSchedule.constant(0.0, 1.0), p, dt=0.3)
    with pytest.raises(ValueError):
        evo.evolve(u, evo.RampSchedule.constant(0.0, 1.0), p, dt=0.1, sample_every=3)
    with pytest.raises(ValueError):
        evo.evolve(u, evo.RampSchedule.constant(0.0, 1.0), p, dt=-0.1)


def test_evolve_aborts_on_blow_up(monkeypatch):
    # the damped flow cannot overflow from finite data, so inject a non-finite chunk
    real_run = evo._run
    calls = []

    def flaky(v, *args):
        calls.append(1)
        out = real_run(v, *args)
        return out * np.nan if len(calls) == 3 else out

    monkeypatch.setattr(evo, "_run", flaky)
    u0 = random_state(32, 7, 0.3)
    tr = evo.evolve(u0, evo.RampSchedule.constant(0.0, 1.0), Parameters(d=0.1, f=1.0), dt=0.1, sample_every=2)
    assert tr.aborted and "non-finite" in tr.message
    assert len(tr.t) == 3 and tr.t[-1] == pytest.approx(0.4)
    assert np.all(np.isfinite(tr.l2norm)) and np.all(np.isfinite(tr.final.values))
    assert tr.final.l2norm == tr.l2norm[-1]


def test_snapshots_and_callback():
    u = random_state(32, 6, 0.3)
    seen = []
    tr = evo.evolve(
        u,
        evo.RampSchedule.constant(1.0, 1.0),
        Parameters(d=0.1, f=1.0),
        dt=0.01,
        sample_every=10,
        snapshot_every=3,
        callback=lambda t, s: seen.append(t),
    )
    assert sorted(tr.snapshots) == [0, 3, 6, 9, 10]
    assert len(seen) == 11
    assert tr.snapshots[10].allclose(tr.final, atol=0)


def test_stable_constant_stays_put():
    g = get_grid(64)
    p = Parameters(d=0.1, zeta=-5.0, f=1.6)
    s = constant_at("hat", p)[0]
    u0 = FieldState.constant(s, g)
    tr = evo.evolve(u0, evo.RampSchedule.constant(-5.0, 10.0), p, dt=1e-3, sample_every=100)
    assert np.max(np.abs(tr.l2norm - u0.l2norm)) < 1e-6


@pytest.mark.parametrize("index", [5, 13])
def test_converged_solution_is_stationary(index):
    b = cached_branch("bar", 0.1, 0.0, 5, 1)
    pt = b.points[index]
    p = b.parameters(pt.param)
    tr = evo.evolve(pt.state, evo.RampSchedule.constant(p.zeta, 10.0), p, dt=1e-3, sample_every=100)
    assert tr.drift(10.0) < 1e-6


# --------------------------------------------------------------------------
# diagnostics


def test_spectrum_of_single_mode():
    g = get_grid(64)
    sp = dict(evo.spectrum(FieldState(np.cos(3 * g.x), np.zeros(64), g)))
    assert len(sp) == 64
    assert sp[3] == pytest.approx(math.log(0.5), abs=1e-13)
    assert max(v for k, v in sp.items() if k != 3) < math.log(1e-14)


def test_spectrum_of_constant():
    g = get_grid(64)
    sp = evo.spectrum(FieldState(np.full(64, 0.6), np.full(64, 0.8), g))
    assert sp[0] == (0, pytest.approx(0.0, abs=1e-14))
    assert max(v for _, v in sp[1:]) < math.log(1e-14)


def test_count_extrema():
    g = get_grid(256)
    u = FieldState(1 + 0.3 * np.cos(5 * g.x), np.zeros(256), g)
    assert evo.count_extrema(u, "max") == 5 and evo.count_extrema(u, "min") == 5
    assert evo.count_extrema(FieldState.constant((1.0, 0.0), g)) == 0
    with pytest.raises(ValueError):
        evo.count_extrema(u, "saddle")


def test_count_extrema_ignores_tail_ripples():
    g = get_grid(256)
    x, _ = evo.periodic_extension(FieldState.zeros(g))
    # a single pulse at 0 with a small ripple: one hump, one dip
    a = 1 + 2 / np.cosh(3 * g.x) + 0.02 * np.cos(9 * g.x)
    u = FieldState(a, np.zeros(256), g)
    assert evo.count_extrema(u, "max") == 1 and evo.count_extrema(u, "min") == 1


def test_periodic_pattern_detection():
    g = get_grid(256)
    u = FieldState(1 + 0.3 * np.cos(5 * g.x) + 0.01 * np.cos(g.x), np.zeros(256), g)
    assert evo.is_periodic_pattern(u, 5)
    assert evo.subharmonic_distance(u, 5) == pytest.approx(0.01, abs=1e-12)
    assert not evo.is_periodic_pattern(u, 5, tol=0.005)
    assert not evo.is_periodic_pattern(FieldState.constant((1.0, 0.0), g), 5)
