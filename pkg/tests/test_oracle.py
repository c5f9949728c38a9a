import math

import pytest

from demkov.core import ModelParams, solve
from demkov.errors import StepLimitError, ToleranceNotMetError
from demkov.oracle import (
    IntegratorConfig,
    integrate_bloch,
    norms,
    oracle_final,
    oracle_w_infinity,
    sample_grid,
)

REF = ModelParams.from_reduced(0.1, 1.5, 25.0)


def test_config_validation():
    for bad in (dict(rel_tol=0.0), dict(abs_tol=-1.0), dict(t_start_factor=5.0), dict(max_steps=10)):
        with pytest.raises(ValueError):
            IntegratorConfig(**bad)


def test_sample_validation():
    with pytest.raises(ValueError):
        integrate_bloch(REF, IntegratorConfig(), [50.0])
    with pytest.raises(ValueError):
        integrate_bloch(REF, IntegratorConfig(), [1.0, 1.0])


def test_sample_grid():
    g = sample_grid(-10, 10, 201)
    assert len(g) == 201 and g[0] == -10 and g[-1] == 10 and g[100] == 0.0
    with pytest.raises(ValueError):
        sample_grid(0, 1, 1)


def test_no_pulse_stays_put():
    traj = integrate_bloch(ModelParams(1.0, 0.0), IntegratorConfig(), [-40.0, 0.0, 5.0])
    assert [(s.u, s.v, s.w) for s in traj.states] == [(0.0, 0.0, -1.0)] * 3
    assert oracle_w_infinity(ModelParams(1.0, 0.0)) == -1.0


def test_exact_resonant_rotation():
    om = 5.0
    p = ModelParams.from_reduced(0.0, 0.0, om)
    ts = [-3.0, 0.0, 2.0]
    traj = integrate_bloch(p, IntegratorConfig(), ts)
    for t, s in zip(ts, traj.states):
        th = 2 * om * math.exp(t) if t <= 0 else 4 * om - 2 * om * math.exp(-t)
        assert s.w == pytest.approx(-math.cos(th), abs=1e-8)
        assert s.source == "oracle"


def test_self_convergence():
    ts = sample_grid(-10, 10, 41)
    coarse = integrate_bloch(REF, IntegratorConfig(rel_tol=1e-10), ts)
    fine = integrate_bloch(REF, IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14), ts)
    assert max(abs(a - b) for a, b in zip(coarse.w, fine.w)) <= 1e-9
    assert fine.step_count > coarse.step_count


def test_cusp_forcing_matches_analytic():
    sol = solve(REF)
    ts = [-0.3, 0.0, 0.3]
    traj = integrate_bloch(REF, IntegratorConfig(force_cusp=True), ts)
    assert max(abs(sol.w(t) - w) for t, w in zip(ts, traj.w)) <= 1e-9
    loose = integrate_bloch(REF, IntegratorConfig(force_cusp=False), [0.3])
    assert loose.w[0] == pytest.approx(sol.w(0.3), abs=1e-6)


def test_budget_and_tolerance_failures():
    with pytest.raises(StepLimitError):
        integrate_bloch(REF, IntegratorConfig(max_steps=1000))
    with pytest.raises(ToleranceNotMetError):
        integrate_bloch(REF, IntegratorConfig(rel_tol=1e-30, abs_tol=1e-300))


def test_final_value_and_tail_bound():
    fin = oracle_final(REF)
    assert fin.w_inf == pytest.approx(solve(REF).w_inf, abs=1e-8)
    assert fin.tail_bound == pytest.approx(50.0 * math.exp(-40.0))


def test_damped_norm_decreases():
    p = ModelParams.from_reduced(0.5, 1.0, 5.0)
    ns = list(norms(integrate_bloch(p, IntegratorConfig(), sample_grid(-10, 10, 101))))
    assert all(b <= a + 1e-10 for a, b in zip(ns, ns[1:]))
    assert ns[-1] < ns[0]
