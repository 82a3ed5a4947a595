from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dissqa.bath import BathSpec, rates
from dissqa.dynamics import (GROUND, _run_kernel, AnnealConfig, EvolutionKind, IntegratorPolicy, anneal_chain,
                             integrate_mode, integrate_modes, log_sample_steps, relax_chain, rhs,
                             rhs_coherent, rhs_dissipative, rhs_full)
from dissqa.errors import ConfigError, IntegratorBlowup
from dissqa.model import Schedule, ground_state_defect, k_values, mode_defect_expectation, rotated_frame

from oracles import (bloch_full, propagate_unitary, rotated_to_defect, schrodinger_defect,
                     static_dissipative_solution)

COH, DISS, FULL = EvolutionKind.COHERENT, EvolutionKind.DISSIPATIVE, EvolutionKind.FULL

unit = st.floats(-1.0, 1.0)
ks = st.floats(1e-3, math.pi - 1e-3)
fields = st.floats(0.0, 12.0)


def final_defect(r, k):
    return mode_defect_expectation(r, rotated_frame(k, 0.0, -1.0).phi, k)


# -- right-hand sides -----------------------------------------------------------

@given(unit, unit, unit, ks, fields, st.floats(-100, 0), st.floats(0, 0.2), st.floats(0.1, 10))
def test_rhs_additivity(x, y, z, k, h, h_dot, alpha, t_eff):
    bath = BathSpec(alpha=alpha, t_eff=t_eff)
    r = np.array([x, y, z])
    full = rhs_full(r, k, h, h_dot, bath)
    parts = rhs_coherent(r, k, h, h_dot) + rhs_dissipative(r, k, h, bath)
    np.testing.assert_allclose(full, parts, rtol=1e-12, atol=1e-12 * (1 + np.max(np.abs(full))))


@given(unit, unit, unit, ks, fields, st.floats(-100, 100))
def test_coherent_rhs_is_a_rotation(x, y, z, k, h, h_dot):
    r = np.array([x, y, z])
    assert abs(np.dot(r, rhs_coherent(r, k, h, h_dot))) <= 1e-9 * (1 + abs(h_dot))


@given(ks, fields)
def test_ground_state_stationary_without_driving(k, h):
    np.testing.assert_array_equal(rhs_coherent(GROUND, k, h, 0.0), 0.0)


def test_dissipative_rhs_vanishes_without_coupling():
    r = np.array([0.3, -0.2, 0.5])
    np.testing.assert_array_equal(rhs_dissipative(r, 0.7, 1.3, BathSpec(alpha=0.0)), 0.0)


def test_rhs_dispatch_and_vectorisation():
    bath = BathSpec()
    r = np.array([[0.1, 0.2, 0.3], [-0.5, 0.0, 0.4]])
    out = rhs(FULL, r, 0.4, 2.0, -0.1, bath)
    assert out.shape == (2, 3)
    np.testing.assert_allclose(out[1], rhs("full", r[1], 0.4, 2.0, -0.1, bath))
    np.testing.assert_allclose(rhs(DISS, r, 0.4, 2.0, -0.1, bath), rhs_dissipative(r, 0.4, 2.0, bath))


# -- single-mode integration against independent references ------------------------

def test_full_mode_matches_adaptive_reference():
    k = math.pi / 2
    ref = bloch_full(k, 10.0, 10.0, 1e-2, 10.0, 1.0)
    r = integrate_mode(k, Schedule(10.0, 10.0), BathSpec())
    np.testing.assert_allclose(r, ref, atol=1e-6, rtol=0)


@pytest.mark.parametrize("k", [0.3, 1.5, 2.8])
def test_coherent_mode_matches_lab_frame_schrodinger(k):
    r = integrate_mode(k, Schedule(10.0, 10.0), BathSpec(), COH)
    assert final_defect(r, k) == pytest.approx(schrodinger_defect(k, 10.0, 10.0), abs=1e-6)
    # the frame conventions agree with an explicit density-matrix rotation
    assert final_defect(r, k) == pytest.approx(rotated_to_defect(r, k, 0.0), abs=1e-12)


def test_coherent_mode_matches_unitary_propagation():
    k, tau = 0.9, 4.0
    r = integrate_mode(k, Schedule(3.0, tau), BathSpec(), COH)
    assert final_defect(r, k) == pytest.approx(propagate_unitary(k, 3.0, tau, 20000), abs=1e-6)


@pytest.mark.parametrize("kind", [DISS, FULL])
def test_dissipative_parts_match_reference(kind):
    k = 2.0
    coh = kind is FULL
    ref = bloch_full(k, 5.0, 8.0, 3e-2, 10.0, 0.5, coherent=coh, dissipative=True)
    r = integrate_mode(k, Schedule(5.0, 8.0), BathSpec(alpha=3e-2, t_eff=0.5), kind)
    np.testing.assert_allclose(r, ref, atol=1e-7, rtol=0)


def test_static_dissipative_relaxation_matches_closed_form():
    h, t_end, N = 0.8, 20.0, 8
    bath = BathSpec(alpha=2e-2, t_eff=1.5)
    res = relax_chain(h, bath, t_end, N, kind=DISS, n_samples=None,
                      policy=IntegratorPolicy(check_convergence=False))
    for k, r in zip(k_values(N), res.finals):
        np.testing.assert_allclose(r, static_dissipative_solution(k, h, 2e-2, 10.0, 1.5, t_end),
                                   atol=1e-10)


def test_ry_decay_rate_under_static_field():
    h, t = 1.7, 3.0
    bath = BathSpec(alpha=5e-2)
    res = relax_chain(h, bath, t, 2, kind=DISS, r0=[0.0, 0.6, 0.0], n_samples=None)
    # N = 2 has the single mode k = pi / 2
    g = rates(math.pi / 2, h, bath)
    assert res.finals[0, 1] == pytest.approx(0.6 * math.exp(-(g.gamma_D + g.gamma_R / 2) * t), rel=1e-7)


def test_rk4_halving_ratio():
    k, h0, tau = 1.0, 3.0, 5.0
    ref = bloch_full(k, h0, tau, 1e-2, 10.0, 1.0)
    s, b = Schedule(h0, tau), BathSpec()
    errs = [np.max(np.abs(integrate_mode(k, s, b, dt=dt) - ref)) for dt in (0.04, 0.02, 0.01)]
    for a, c in zip(errs, errs[1:]):
        assert 16 * 0.7 <= a / c <= 16 * 1.3


# -- chain-level behaviour -----------------------------------------------------------

def test_coherent_norm_is_conserved():
    res = anneal_chain(AnnealConfig(N=64, tau=50.0, kind=COH))
    norms = np.linalg.norm(res.finals, axis=1)
    assert np.max(np.abs(norms - 1.0)) <= 1e-6


def test_sudden_quench_freezes_the_lab_state():
    cfg = AnnealConfig(N=64, tau=1e-4)
    res = anneal_chain(cfg)
    frozen = np.sum(ground_state_defect(k_values(64), cfg.h0)) / 64
    assert res.n_def == pytest.approx(frozen, abs=1e-3)
    assert res.n_def == pytest.approx(0.5, abs=0.05)


def test_adiabatic_limit_has_few_defects():
    res = anneal_chain(AnnealConfig(N=64, tau=1e4, kind=COH))
    assert res.n_def < 1e-3


def test_zero_coupling_full_equals_coherent():
    cfg = AnnealConfig(N=32, tau=20.0, alpha=0.0)
    full = anneal_chain(cfg)
    coh = anneal_chain(cfg.with_(kind=COH))
    np.testing.assert_array_equal(full.finals, coh.finals)
    assert anneal_chain(cfg.with_(kind=DISS)).n_def == pytest.approx(0.0, abs=1e-14)


def test_parallel_and_serial_runs_are_bit_identical():
    cfg = AnnealConfig(N=64, tau=10.0)
    a = anneal_chain(cfg, jobs=1, n_samples=16)
    b = anneal_chain(cfg, jobs=3, n_samples=16)
    assert a.n_def == b.n_def
    np.testing.assert_array_equal(a.finals, b.finals)
    np.testing.assert_array_equal(a.n_def_t, b.n_def_t)


def test_mode_order_does_not_matter():
    ks = k_values(32)
    s, b = Schedule(10.0, 5.0), BathSpec()
    fwd = integrate_modes(ks, s, b, dt=0.01).finals
    rev = integrate_modes(ks[::-1], s, b, dt=0.01).finals
    np.testing.assert_array_equal(fwd, rev[::-1])


def test_time_series_ends_at_final_value():
    res = anneal_chain(AnnealConfig(N=32, tau=10.0), n_samples=32)
    assert res.times[0] == 0.0 and res.times[-1] == pytest.approx(10.0)
    assert res.n_def_t[-1] == res.n_def
    # starts in the ground state at h0
    assert res.n_def_t[0] == pytest.approx(np.sum(ground_state_defect(k_values(32), 10.0)) / 32)


def test_convergence_check_reports():
    res = anneal_chain(AnnealConfig(N=32, tau=10.0))
    assert res.converged and res.refinements == 0
    strict = IntegratorPolicy(dt_max=0.05, convergence_tol=1e-12, convergence_atol=0.0,
                              max_refinements=2)
    res = anneal_chain(AnnealConfig(N=16, tau=3.0, policy=strict))
    assert res.refinements == 2 and not res.converged
    assert res.dt < 0.05 / 3


def _late_distance_increments(k, h, bath, dt=0.01):
    g = rates(k, h, bath)
    t0 = 5.0 / g.gamma_D
    n = int(round(3 * t0 / dt))
    steps = np.arange(0, n + 1, 10)
    tr = _run_kernel([k], h, h, n * dt, n, bath, FULL, GROUND, steps)
    dist = np.abs(tr.samples[0, :, 0] - g.r_bar_x)
    return np.diff(dist[steps * tr.dt >= t0]), dist[0]


def test_relaxation_is_monotone_after_transient():
    bath = BathSpec(alpha=1e-3)
    for k in k_values(16):
        inc, _ = _late_distance_increments(k, 0.5, bath)
        assert np.max(inc) <= 1e-9


def test_relaxation_wiggles_stay_small_at_stronger_coupling():
    # the non-secular terms make r_x ring around its equilibrium; the ringing is tiny
    bath = BathSpec(alpha=2e-2)
    for k in k_values(16):
        inc, d0 = _late_distance_increments(k, 0.5, bath)
        assert np.max(inc) <= 1e-6 * d0


def test_relaxation_reaches_steady_state_per_mode():
    h, N = 0.5, 16
    bath = BathSpec(alpha=2e-2)
    res = relax_chain(h, bath, 2000.0, N, n_samples=None)
    g = rates(k_values(N), h, bath)
    np.testing.assert_allclose(res.finals[:, 0], g.r_bar_x, atol=1e-6)
    np.testing.assert_allclose(res.finals[:, 1:], 0.0, atol=1e-6)


def test_zero_coupling_relaxation_is_constant():
    res = relax_chain(0.5, BathSpec(alpha=0.0), 50.0, 16, n_samples=8)
    np.testing.assert_allclose(res.n_def_t, res.n_def_t[0], atol=1e-14)


def test_log_sample_steps():
    s = log_sample_steps(1000, 10)
    assert s[0] == 0 and s[-1] == 1000
    assert np.all(np.diff(s) > 0)
    np.testing.assert_array_equal(log_sample_steps(5, 1), [5])


def test_blowup_reports_diagnostics():
    with pytest.raises(IntegratorBlowup) as err:
        relax_chain(1.0, BathSpec(), 1.0, 4, r0=[1.6, 0.0, 0.0], n_samples=None)
    assert err.value.k is not None and err.value.step == 1 and err.value.norm > 1.5


def test_unstable_step_is_refused():
    with pytest.raises(ConfigError):
        integrate_mode(1.0, Schedule(10.0, 10.0), BathSpec(), dt=0.2)


@pytest.mark.parametrize("args", [(-0.1, 1.0, 4), (0.5, 0.0, 4), (0.5, 1.0, 5)])
def test_relax_validation(args):
    h, t_end, N = args
    with pytest.raises(ConfigError):
        relax_chain(h, BathSpec(), t_end, N)


def test_anneal_config_validation():
    with pytest.raises(ConfigError):
        AnnealConfig(N=7)
    with pytest.raises(ConfigError):
        AnnealConfig(t_eff=0.0)
    with pytest.raises(ValueError):
        AnnealConfig(kind="sideways")
    with pytest.raises(ConfigError):
        IntegratorPolicy(dt_max=0.0)
