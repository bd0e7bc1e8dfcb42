import numpy as np
import pytest

from conftest import two_link_fixed
from ddyn import dissipative as dv
from ddyn import redundant as rd
from ddyn import rigid_body as rb
from ddyn.errors import ModelError

FWD_SCENARIO = dict(tau_phi=[0.3, -0.3], f_ext=None, mode="fwd")
BWD_SCENARIO = dict(tau_phi=[0.0, 0.0], f_ext=[0.0, 150.0], mode="bwd")


def run(model, steps=300, **scenario):
    state = rb.SystemState.from_reduced(model, model.default_q())
    return rd.simulate_redundant_system(model, state, dt=1e-4, steps=steps, **scenario)


def reduced_qdd(model, tr, k):
    st = tr.state(k)
    dd = dv.assemble(model, st.q, st.qd, tr.directions(k))
    tau = tr.tau_s[k, model.n_reduced:]
    J = rb.contact_jacobian(model, st.q)
    f = np.linalg.lstsq(J.T, tr.tau_s[k, : model.n_reduced], rcond=None)[0]
    return dv.forward_dynamics(dd, tau, f, J)


@pytest.mark.parametrize("scenario,forward", [(FWD_SCENARIO, True), (BWD_SCENARIO, False)])
def test_oracle_matches_reduced(case_study, scenario, forward):
    tr = run(case_study, **scenario)
    mask = tr.monotone_mask()
    assert mask.sum() > 250
    assert np.all(tr.forward[mask] == forward)
    n = case_study.n_reduced
    for k in np.flatnonzero(mask)[::25]:
        qdd = reduced_qdd(case_study, tr, k)
        assert np.linalg.norm(qdd - tr.sdd[k, :n]) <= 1e-9 * np.linalg.norm(qdd)


def test_power_ratios():
    model = two_link_fixed(gravity=0.0)
    tr = run(model, tau_phi=[0.02, 0.01])
    k = 200
    np.testing.assert_allclose(tr.joint_power[k] / tr.rotor_power[k], model.transmissions.eta_f, rtol=1e-9)
    tr = run(model, tau_phi=[0.0, 0.0], f_ext=[5.0, 5.0], mode="bwd")
    np.testing.assert_allclose(tr.rotor_power[k] / tr.joint_power[k], model.transmissions.eta_b, rtol=1e-9)


@pytest.mark.parametrize("scenario", [FWD_SCENARIO, BWD_SCENARIO])
def test_dissipation_and_power_balance(case_study, scenario):
    tr = run(case_study, **scenario)
    assert np.all(tr.dissipated_power >= -1e-12)
    assert np.all(np.diff(tr.dissipated_energy) >= -1e-15)
    assert np.max(tr.power_residual) < 1e-5
    assert np.max(tr.constraint_residual) < 1e-12


def test_efficiency_null_on_oracle_states(case_study):
    tr = run(case_study, **FWD_SCENARIO)
    for k in np.flatnonzero(tr.monotone_mask())[::20]:
        st = tr.state(k)
        dd = dv.assemble(case_study, st.q, st.qd, tr.directions(k))
        r = dv.meshing_forces(case_study, st, tr.sdd[k], tr.tau_s[k])
        assert np.max(np.abs(dv.efficiency_null_residual(dd.K, dd.E_s, r))) < 1e-8


def test_lossless_conserves_energy(case_study):
    from dataclasses import replace

    model = replace(case_study.lossless(), gravity=0.0)
    state = rb.SystemState.from_reduced(model, model.default_q(), [0.1, -0.2, 0.5, 1.0, -2.0])
    tr = rd.simulate_redundant_system(model, state, steps=2000, check_power=False)
    assert np.max(np.abs(tr.energy - tr.energy[0])) <= 1e-9 * tr.energy[0]
    assert tr.dissipated_energy[-1] == 0.0


def test_time_varying_input():
    model = two_link_fixed()
    tr = run(model, steps=50, tau_phi=lambda t: [0.01 + t, 0.0])
    assert tr.tau_s[50, 2] == pytest.approx(0.01 + 50e-4)


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(steps=0), dict(smoothing=0.0)])
def test_argument_checks(kwargs):
    model = two_link_fixed()
    state = rb.SystemState.from_reduced(model, model.default_q())
    with pytest.raises(ModelError):
        rd.simulate_redundant_system(model, state, **kwargs)


def test_inconsistent_initial_state():
    model = two_link_fixed()
    state = rb.SystemState(np.zeros(2), np.zeros(2), np.ones(2), np.zeros(2))
    with pytest.raises(ModelError):
        rd.simulate_redundant_system(model, state)


def test_case_study_power_ratio(case_study):
    tr = run(case_study, **FWD_SCENARIO)
    k = np.flatnonzero(tr.monotone_mask())[-1]
    np.testing.assert_allclose(tr.joint_power[k] / tr.rotor_power[k], case_study.transmissions.eta_f, rtol=1e-3)
