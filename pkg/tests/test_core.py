import math

import numpy as np
import pytest

from demkov.core import (
    BlochVector,
    ModelParams,
    ReducedParams,
    TimeSeries,
    bloch_from_w,
    branch2_constants,
    cramer_constants,
    final_inversion,
    fundamental_set,
    matching_at_cusp,
    reduce,
    solve,
    time_series,
    w_branch1,
    w_full,
    w_infinity,
)
from demkov.errors import DegenerateParameterError, InversionUnavailableError
from demkov.oracle import IntegratorConfig, integrate_bloch

# Frozen reference, cross-checked against the adaptive integrator
# (which gives -0.3218356587096 at rel_tol 1e-10).
REF = ModelParams.from_reduced(0.1, 1.5, 25.0)
REF_W_INF = -0.32183565871194225


def test_params_validation():
    for bad in (dict(delta=1, omega0=1, t_width=0), dict(delta=1, omega0=-1),
                dict(delta=math.nan, omega0=1), dict(delta=1, omega0=1, gamma_deph=-0.1)):
        with pytest.raises(ValueError):
            ModelParams(**bad)


def test_reduced_roundtrip():
    p = ModelParams(delta=3.0, omega0=50.0, t_width=1.0, gamma_deph=0.2)
    rp = reduce(p)
    assert (rp.gamma, rp.delta, rp.omega) == pytest.approx((0.1, 1.5, 25.0))
    assert ModelParams.from_reduced(0.1, 1.5, 25.0) == p
    assert p.rabi(-2.0) == pytest.approx(50.0 * math.exp(-2.0))
    assert ReducedParams(0.0, 1e-9, 1.0).is_resonant


def test_trivial_pulse():
    p = ModelParams.from_reduced(0.1, 1.0, 0.0)
    assert w_full(p, 3.0) == -1.0
    fi = final_inversion(p)
    assert (fi.w_inf, fi.probability, fi.route) == (-1.0, 0.0, "trivial")
    ts = time_series(p, -2, 2, 5)
    assert all(s.w == -1.0 and s.u == 0.0 and s.v == 0.0 for s in ts.states)


def test_frozen_reference_value():
    assert w_infinity(REF) == pytest.approx(REF_W_INF, abs=1e-12)
    fi = final_inversion(REF)
    assert fi.probability == pytest.approx(0.5 * (1 + REF_W_INF))
    assert fi.est_error < 1e-9
    assert fi.route == "general"


@pytest.mark.parametrize("delta", [0.5, 1.5])
def test_weak_pulse_perturbative_limit(delta):
    """First order: p = |(1/2) int Omega e^{i Delta t} dt|^2 = 4 w^2 / (1 + 4 d^2)^2."""
    om = 1e-3
    p = final_inversion(ModelParams.from_reduced(0.0, delta, om)).probability
    assert p == pytest.approx(4 * om**2 / (1 + 4 * delta**2) ** 2, rel=1e-5)


def test_detuning_sign_symmetry():
    a = solve(ModelParams.from_reduced(0.05, 1.2, 3.0))
    b = solve(ModelParams.from_reduced(0.05, -1.2, 3.0))
    for t in (-2.0, 0.0, 0.7, 4.0):
        assert a.w(t) == pytest.approx(b.w(t), abs=1e-12)
    assert a.bloch(1.0).u == pytest.approx(-b.bloch(1.0).u, abs=1e-10)


def test_time_scaling():
    """Reduced parameters fix the solution up to t -> t/T."""
    one = solve(ModelParams.from_reduced(0.1, 0.8, 2.0, t_width=1.0))
    two = solve(ModelParams.from_reduced(0.1, 0.8, 2.0, t_width=2.5))
    for t in (-1.5, 0.3, 2.0):
        assert two.w(2.5 * t) == pytest.approx(one.w(t), abs=1e-13)
    assert two.w_inf == pytest.approx(one.w_inf, abs=1e-13)


def test_cramer_matches_linear_solve():
    sol = solve(ModelParams.from_reduced(0.05, 3.0, 5.0))
    ref = cramer_constants(sol.cusp, sol.fs)
    got = branch2_constants(sol.cusp, sol.fs)
    for name in ("a_plus", "b_plus", "c_plus"):
        assert abs(getattr(got, name) - getattr(ref, name)) <= 1e-12 * max(1.0, abs(getattr(ref, name)))
    assert abs(sol.constants.a_plus.imag) < 1e-12


def test_branch1_starts_in_ground_state():
    rp = reduce(REF)
    assert w_branch1(rp, -30.0) == pytest.approx(-1.0, abs=1e-20)
    with pytest.raises(ValueError):
        w_branch1(rp, 0.5)


def test_resonant_inputs_rejected_by_general_basis():
    with pytest.raises(DegenerateParameterError):
        fundamental_set(ReducedParams(0.1, 0.0, 1.0))
    assert solve(ModelParams.from_reduced(0.1, 0.0, 1.0)).route == "resonant"


def test_imaginary_part_vanishes():
    sol = solve(REF)
    for t in np.linspace(0.01, 10, 40):
        assert abs(sol.w_complex(float(t))[0].imag) < 1e-9


def test_cusp_jump_law():
    for g, d, om in ((0.0, 0.5, 1.0), (0.1, 1.5, 25.0), (0.5, 3.0, 5.0)):
        c = matching_at_cusp(reduce(ModelParams.from_reduced(g, d, om)))
        assert c.w2dot_right - c.w2dot_left == pytest.approx(-2.0 * c.w1dot, rel=1e-12)


def test_bloch_vector_matches_oracle():
    ts = [-6.0, -1.0, 0.0, 0.5, 3.0, 9.0]
    for g, d, om in ((0.0, 1.5, 5.0), (0.1, 0.5, 25.0)):
        p = ModelParams.from_reduced(g, d, om)
        sol = solve(p)
        traj = integrate_bloch(p, IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14), ts)
        for t, ref in zip(ts, traj.states):
            got = sol.bloch(t)
            assert got.source == "analytic"
            assert (got.u, got.v, got.w) == pytest.approx((ref.u, ref.v, ref.w), abs=1e-8)


def test_bloch_fallbacks():
    p = ModelParams.from_reduced(0.1, 1.0, 1.0)
    assert bloch_from_w(p, -800.0).source == "initial"
    with pytest.raises(InversionUnavailableError):
        bloch_from_w(p, 800.0)
    sol = solve(p)
    with pytest.raises(InversionUnavailableError):
        sol.bloch(800.0)
    trivial = bloch_from_w(ModelParams(1.0, 0.0), 1.0)
    assert trivial == BlochVector(0.0, 0.0, -1.0, source="trivial")


def test_time_series_validation():
    with pytest.raises(ValueError):
        TimeSeries([0.0, 0.0], [BlochVector(0, 0, -1)] * 2)
    with pytest.raises(ValueError):
        time_series(REF, 1.0, -1.0, 10)
    with pytest.raises(ValueError):
        time_series(REF, -1.0, 1.0, 1)
    ts = time_series(REF, -1.0, 1.0, 3)
    assert ts.times == [-1.0, 0.0, 1.0]
