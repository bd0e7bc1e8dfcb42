import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import one_link, two_link_fixed
from ddyn import dissipative as dv
from ddyn import rigid_body as rb
from ddyn.errors import ModelError, SingularError
from ddyn.flow import FlowDirection


def test_one_link_inertias():
    model = one_link()
    q = [0.0]
    assert dv.conventional(model, q).H[0, 0] == pytest.approx(2.0, abs=1e-12)
    assert dv.assemble(model, q, flow="fwd").H[0, 0] == pytest.approx(1.8, abs=1e-12)
    assert dv.assemble(model, q, flow="bwd").H[0, 0] == pytest.approx(1.0 + 1.0 / 0.75, abs=1e-12)


def test_one_link_actuation_map():
    dd = dv.assemble(one_link(), [0.0], flow="fwd")
    # rotor torque amplified by N and scaled by eta_f
    assert dd.actuation_map[0, 0] == pytest.approx(10 * 0.8)


def test_lossless_is_symmetric_and_conventional(case_study):
    q = case_study.default_q()
    lossless = case_study.lossless()
    for flow in ("fwd", "bwd", ["fwd", "bwd"]):
        H = dv.assemble(lossless, q, flow=flow).H
        assert np.max(np.abs(H - H.T)) <= 1e-12
    # rotor inertia reflected by N^2 onto the joint diagonal
    H_c = dv.conventional(case_study, q).H
    H_b = rb.mass_matrix(case_study, q)
    np.testing.assert_allclose(np.diag(H_c - H_b)[3:], 400 * case_study.rotor_inertias)


def test_coupled_topology_rotor_block():
    """Diagonal rotor inertias keep H symmetric even with a coupled D."""
    model = two_link_fixed(eta_f=(0.9, 0.6), D=[[1.0, 0.0], [1.0, 1.0]])
    q = model.default_q()
    H = dv.assemble(model, q, flow="fwd").H
    P = np.linalg.inv(model.transmissions.DR)
    expected = rb.mass_matrix(model, q) + P.T @ np.diag([0.9, 0.6] * model.rotor_inertias) @ P
    np.testing.assert_allclose(H, expected, atol=1e-12)


def test_reduce_matches_kkt_solution():
    """Reduced q'' equals the KKT solve with loss forces chosen so K^T E r = 0."""
    model = two_link_fixed()
    q, qd = model.default_q(), np.array([0.4, -0.3])
    tau = np.array([0.2, 0.1])
    dd = dv.assemble(model, q, qd, "fwd")
    qdd = dv.forward_dynamics(dd, tau)
    sdd = dv.redundant_acceleration(dd, qdd)
    state = rb.SystemState.from_reduced(model, q, qd)
    tau_s = dv.generalized_forces(model, q, tau)
    r = dv.meshing_forces(model, state, sdd, tau_s)
    assert np.max(np.abs(dv.efficiency_null_residual(dd.K, dd.E_s, r))) < 1e-10
    # without losses the plain null-space projection would hold instead
    assert np.max(np.abs(dd.K.T @ r)) > 1e-6


def test_external_force_needs_jacobian(case_study):
    dd = dv.assemble(case_study, case_study.default_q())
    with pytest.raises(ModelError):
        dv.forward_dynamics(dd, f_ext=[0.0, 1.0])
    J = rb.contact_jacobian(case_study, case_study.default_q())
    qdd = dv.forward_dynamics(dd, np.zeros(2), [0.0, 10.0], J)
    assert qdd.shape == (5,)


def test_resolve_flow_direction(case_study):
    state = rb.SystemState.from_reduced(case_study, case_study.default_q(), [0, 0, 0, 1.0, -1.0])
    fa = dv.resolve_flow_direction(case_study, state, [1.0, 1.0])
    assert fa.directions == (FlowDirection.FWD, FlowDirection.BWD)
    fa = dv.resolve_flow_direction(case_study, state, [0.0, 0.0], mode="bwd")
    assert fa.directions == (FlowDirection.BWD, FlowDirection.BWD)


def test_virtual_task_force():
    model = two_link_fixed()
    dd = dv.assemble(model, model.default_q())
    J = rb.contact_jacobian(model, model.default_q())
    f = np.array([3.0, -1.0])
    tau = dv.virtual_task_force_torques(dd, J, f)
    np.testing.assert_allclose(dd.B_m @ tau, J.T @ f)


def test_virtual_task_force_needs_fixed_base(case_study):
    dd = dv.assemble(case_study, case_study.default_q())
    with pytest.raises(ModelError):
        dv.virtual_task_force_torques(dd, np.eye(2, 5), [1.0, 0.0])


def test_singular_mass_matrix():
    model = one_link(I_link=0.0, I_rotor=0.0)
    with pytest.raises(SingularError):
        dv.forward_dynamics(dv.assemble(model, [0.0]), [1.0])


def test_meshing_split():
    model = two_link_fixed()
    r = np.array([0.0, 0.0, 1.0, 2.0])
    lam = np.array([0.5, 0.25])
    tau_d = dv.meshing_split(model, r, lam)
    # A^T lam on the rotor rows is -(DR)^T lam
    np.testing.assert_allclose(tau_d[2:], r[2:] + model.transmissions.DR.T @ lam)


@settings(max_examples=40, deadline=None)
@given(
    eta=st.lists(st.floats(0.55, 1.0), min_size=2, max_size=2),
    flows=st.lists(st.sampled_from(["fwd", "bwd"]), min_size=2, max_size=2),
)
def test_efficiency_null_property(eta, flows):
    """Any r = H_s s'' + c_s - tau_s from the reduced dynamics obeys K^T E r = 0."""
    model = two_link_fixed(eta_f=eta)
    q, qd = np.array([0.3, 1.1]), np.array([0.5, -0.2])
    dd = dv.assemble(model, q, qd, flows)
    tau = np.array([0.3, -0.4])
    sdd = dv.redundant_acceleration(dd, dv.forward_dynamics(dd, tau))
    r = dv.meshing_forces(model, rb.SystemState.from_reduced(model, q, qd), sdd, dv.generalized_forces(model, q, tau))
    assert np.max(np.abs(dv.efficiency_null_residual(dd.K, dd.E_s, r))) < 1e-9


def test_symmetric_part():
    M = np.array([[1.0, 2.0], [0.0, 3.0]])
    np.testing.assert_allclose(dv.symmetric_part(M), [[1.0, 1.0], [1.0, 3.0]])


def test_wedge_recast_as_transmission():
    """Block as joint, wedge as rotor with N = 1/cos(alpha): same reduced dynamics."""
    import math

    from ddyn import wedge as wg
    from ddyn.transmission import TransmissionSet

    p = wg.WedgeParams(1.3, 0.6, math.radians(35.0), 0.2)
    eff = wg.efficiencies(p)
    t = TransmissionSet([p.gear_ratio], [eff.eta_f], [eff.eta_b])
    f_x, f_u = 0.4, 1.7
    for direction in (FlowDirection.FWD, FlowDirection.BWD):
        dd = dv.reduce_matrices(np.diag([p.M, p.m]), np.zeros(2), t, direction, 0)
        qdd = dv.forward_dynamics(dd, [-f_u], [f_x], [[1.0]])
        assert qdd[0] == pytest.approx(wg.reduced_acceleration(p, direction, f_x, f_u), rel=1e-13)


def test_one_link_asymmetry_formula():
    model = one_link()
    gap = dv.assemble(model, [0.0], flow="bwd").H - dv.assemble(model, [0.0], flow="fwd").H
    assert gap[0, 0] == pytest.approx((1 / 0.75 - 0.8) * 100 * 0.01)


def test_trivial_zero_cases():
    model = one_link()
    dd = dv.assemble(model, [0.3])
    np.testing.assert_array_equal(dv.forward_dynamics(dd, [0.0]), [0.0])
    state = rb.SystemState.from_reduced(model, [0.3])
    r = dv.meshing_forces(model, state, np.zeros(2), np.zeros(2))
    np.testing.assert_array_equal(r, 0.0)
    np.testing.assert_array_equal(dv.efficiency_null_residual(dd.K, dd.E_s, r), 0.0)
    # an arbitrary r is not in the efficiency null
    assert abs(dv.efficiency_null_residual(dd.K, dd.E_s, [1.0, 1.0])[0]) > 0.1


def test_one_link_virtual_force():
    model = one_link()
    dd = dv.assemble(model, [0.0])
    J = rb.contact_jacobian(model, [0.0])
    np.testing.assert_allclose(J, [[0.0], [1.0]])
    np.testing.assert_allclose(dv.virtual_task_force_torques(dd, J, [0.0, 1.0]), [0.1])
    np.testing.assert_array_equal(dv.virtual_task_force_torques(dd, J, [0.0, 0.0]), [0.0])


def test_two_link_virtual_force_identity():
    model = two_link_fixed()
    q = np.array([np.pi / 3, np.pi / 3])
    dd = dv.assemble(model, q)
    J = rb.contact_jacobian(model, q)
    f = np.array([1.5, -0.5])
    np.testing.assert_allclose(dv.virtual_task_force_torques(dd, J, f), model.transmissions.DR.T @ J.T @ f, atol=1e-12)


def test_resolve_static_mode(case_study):
    state = rb.SystemState.from_reduced(case_study, case_study.default_q())
    fa = dv.resolve_flow_direction(case_study, state, [1.0, 1.0], mode="bwd")
    assert fa.directions == (FlowDirection.BWD, FlowDirection.BWD)
