import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddyn import wedge as wg
from ddyn.errors import ForwardLockedError, ModelError
from ddyn.flow import FlowDirection

FWD, BWD = FlowDirection.FWD, FlowDirection.BWD


def params(mu=0.2, alpha_deg=45.0, M=1.0, m=1.0):
    return wg.WedgeParams(M, m, math.radians(alpha_deg), mu)


def kkt_oracle(p, f_x, f_u, direction):
    """Direct 3x3 solve with friction placed by hand for a known direction.

    Friction on the block opposes its motion: for FWD the wedge pushes the
    block towards -x, for BWD the block moves towards +x.
    """
    c, k = math.cos(p.alpha), p.loss_factor
    # block moving -x (FWD) gets +k|lam|, moving +x (BWD) gets -k|lam|; lam > 0 in both
    sgn = 1.0 if direction is FWD else -1.0
    A = np.array([[p.M, 0.0, 1.0 - sgn * k], [0.0, p.m, -c], [1.0, -c, 0.0]])
    xdd, _, lam = np.linalg.solve(A, [f_x, -f_u, 0.0])
    assert lam > 0
    return xdd


def test_case_values():
    eff = wg.efficiencies(params())
    assert eff.eta_f == pytest.approx(0.8, abs=1e-15)
    assert eff.eta_b == pytest.approx(1 / 1.2, abs=1e-15)
    assert params().gear_ratio == pytest.approx(math.sqrt(2))


def test_frictionless_is_lossless():
    eff = wg.efficiencies(params(mu=0.0, alpha_deg=30))
    assert eff == (1.0, 1.0)


def test_forward_lock():
    p = params(mu=0.5, alpha_deg=70)
    assert wg.efficiencies(p).forward_locked
    with pytest.raises(ForwardLockedError):
        wg.impedance_coefficient(p, FWD)
    # backdriving still works
    assert wg.impedance_coefficient(p, BWD) > 0


def test_reduced_accelerations_match_hand_solve():
    p = params()
    assert wg.reduced_acceleration(p, FWD, 0.0, 1.0) == pytest.approx(kkt_oracle(p, 0.0, 1.0, FWD), rel=1e-12)
    assert wg.reduced_acceleration(p, BWD, 1.0, 0.0) == pytest.approx(kkt_oracle(p, 1.0, 0.0, BWD), rel=1e-12)
    assert wg.reduced_acceleration(p, FWD, 0.0, 1.0) == pytest.approx(-0.435143, abs=1e-6)
    assert wg.reduced_acceleration(p, BWD, 1.0, 0.0) == pytest.approx(1 / 3.4, abs=1e-12)


def test_impedance_values():
    p = params(M=2.0, m=0.5)
    c2 = 0.5
    assert wg.impedance_coefficient(p, FWD) == pytest.approx(2.0 / 0.8 + 0.5 / c2)
    assert wg.impedance_coefficient(p, BWD) == pytest.approx(2.0 + 0.5 / (c2 * (1 / 1.2)))


@pytest.mark.parametrize("kwargs", [dict(M=0.0), dict(m=-1.0), dict(mu=-0.1), dict(alpha_deg=90.0)])
def test_invalid_parameters(kwargs):
    with pytest.raises(ModelError):
        params(**kwargs)


@settings(max_examples=60, deadline=None)
@given(mu=st.floats(0.0, 0.5), alpha=st.floats(5.0, 85.0))
def test_efficiency_identities(mu, alpha):
    p = params(mu, alpha)
    k = mu * math.tan(math.radians(alpha))
    eff = wg.efficiencies(p)
    assert eff.eta_b <= 1.0
    assert eff.eta_f <= eff.eta_b + 1e-15
    # eta_f + 1/eta_b = 2 for the wedge
    assert eff.eta_f + 1.0 / eff.eta_b == pytest.approx(2.0, abs=1e-12)
    assert wg.effective_efficiency(p, BWD) == pytest.approx(1.0 + k, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    mu=st.floats(0.0, 0.4),
    alpha=st.floats(10.0, 60.0),
    push=st.floats(0.5, 5.0),
)
def test_forward_reduced_matches_kkt(mu, alpha, push):
    p = params(mu, alpha)
    if wg.efficiencies(p).forward_locked:
        return
    got = wg.reduced_acceleration(p, FWD, 0.0, push)
    assert got == pytest.approx(kkt_oracle(p, 0.0, push, FWD), rel=1e-10)


def _settled(tr, rate=1e-3):
    return np.flatnonzero(np.abs(tr.xd) > rate)


@pytest.mark.parametrize("direction,f_x,f_u", [(FWD, 0.0, 1.0), (BWD, 1.0, 0.0), (FWD, 0.2, 2.0), (BWD, 3.0, 0.5)])
def test_oracle_agrees_with_reduced(direction, f_x, f_u):
    p = params(0.15, 35.0, M=1.5, m=0.7)
    tr = wg.simulate_redundant(p, f_x, f_u, dt=1e-4, steps=1500)
    idx = _settled(tr)
    assert idx.size > 1000
    assert all(tr.flow(k) is direction for k in idx)
    expected = wg.reduced_acceleration(p, direction, f_x, f_u)
    assert np.max(np.abs(tr.xdd[idx] - expected)) <= 1e-9 * abs(expected)


def test_oracle_constraint_and_efficiency_null():
    p = params()
    tr = wg.simulate_redundant(p, 0.0, 1.0, dt=1e-4, steps=800)
    assert np.max(np.abs(tr.x - tr.cos_alpha * tr.u)) < 1e-12
    r = tr.meshing_forces()
    idx = _settled(tr)
    assert np.max(np.abs(wg.efficiency_null(p, r[idx], FWD))) < 1e-12
    # the wrong efficiency does not annihilate r
    assert np.min(np.abs(wg.efficiency_null(p, r[idx], BWD))) > 1e-3


def test_meshing_ratio_forward():
    # the wedge-side meshing force equals -cos(alpha)/eta_f times the block side
    p = params()
    tr = wg.simulate_redundant(p, 0.0, 1.0, dt=1e-4, steps=500)
    k = _settled(tr)[-1]
    r = tr.meshing_forces()[k]
    assert r[0] / r[1] == pytest.approx(-0.8 / math.cos(p.alpha), rel=1e-12)


def test_oracle_time_varying_forces():
    p = params(0.1, 30.0)
    tr = wg.simulate_redundant(p, lambda t: 0.0, lambda t: 1.0 + t, dt=1e-4, steps=500)
    k = 400
    assert tr.xdd[k] == pytest.approx(wg.reduced_acceleration(p, FWD, 0.0, 1.0 + tr.t[k]), rel=1e-9)


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(steps=0), dict(smoothing=0.0)])
def test_simulation_argument_checks(kwargs):
    args = dict(dt=1e-4, steps=10)
    args.update(kwargs)
    with pytest.raises(ModelError):
        wg.simulate_redundant(params(), 0.0, 1.0, **args)


def test_frictionless_oracle_terminal_velocity():
    p = params(0.0, 45.0)
    tr = wg.simulate_redundant(p, 1.0, 0.0, dt=1e-4, steps=10_000)
    assert tr.xd[-1] == pytest.approx(tr.t[-1] / 3.0, abs=1e-6)
    assert np.max(np.abs(tr.x - tr.cos_alpha * tr.u)) <= 1e-9


def test_frictionless_directions_coincide():
    p = params(0.0, 30.0)
    assert wg.reduced_acceleration(p, FWD, 0.3, 1.2) == wg.reduced_acceleration(p, BWD, 0.3, 1.2)
    assert wg.impedance_coefficient(p, FWD) == pytest.approx(wg.impedance_coefficient(p, BWD))
    assert wg.impedance_coefficient(params(0.0, 45.0), FWD) == pytest.approx(3.0)


def test_reference_efficiency_values():
    assert wg.efficiencies(params(0.5, 45.0)) == pytest.approx((0.5, 2.0 / 3.0))
    assert wg.reduced_acceleration(params(0.0, 45.0), FWD, 1.0, 0.0) == pytest.approx(1.0 / 3.0)


@settings(max_examples=50, deadline=None)
@given(mu=st.floats(0.01, 0.3), alpha=st.floats(5.0, 60.0), d=st.floats(0.001, 0.05))
def test_impedance_monotone(mu, alpha, d):
    base = params(mu, alpha)
    for direction in (FWD, BWD):
        c = wg.impedance_coefficient(base, direction)
        assert wg.impedance_coefficient(params(mu + d, alpha), direction) > c
        assert wg.impedance_coefficient(params(mu, alpha + 10 * d), direction) > c


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(0.001, 0.5), alpha=st.floats(1.0, 80.0))
def test_strict_ordering(mu, alpha):
    eff = wg.efficiencies(params(mu, alpha))
    assert eff.eta_f < eff.eta_b < 1.0
