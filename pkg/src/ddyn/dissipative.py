"""Efficiency-augmented equations of motion.

Projecting the redundant dynamics with ``K^T E_s`` instead of ``K^T`` removes
the meshing forces of lossy couplings and yields

    (K^T E_s H_s K) q'' + K^T E_s c_s = J^T f_ext + [0; B_m E_m] tau_phi

where ``E_s``/``E_m`` hold ``eta_f`` on forward-driven couplings and
``1/eta_b`` on backdriven ones.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rigid_body as rb
from .errors import ModelError, SingularError
from .flow import FlowDirection
from .transmission import (
    COND_LIMIT,
    FlowAssignment,
    TransmissionSet,
    constraint_matrices,
    efficiency_matrices,
    flow_assignment,
)

POWER_EPS = 1e-9


@dataclass(frozen=True)
class DissipativeDynamics:
    """Snapshot of the reduced dynamics at one state for one flow assignment.

    ``H`` is generally not symmetric once efficiencies differ between
    couplings of a non-diagonal topology; it is used as-is.
    """

    H: np.ndarray
    c: np.ndarray
    actuation_map: np.ndarray
    flow: FlowAssignment
    K: np.ndarray
    E_s: np.ndarray
    B_m: np.ndarray
    b: int

    @property
    def E_m(self) -> np.ndarray:
        return np.diag(self.flow.effective_eta)

    def solve(self, rhs) -> np.ndarray:
        _check_conditioning(self.H, "efficiency-augmented mass matrix")
        return np.linalg.solve(self.H, rhs)


def _check_conditioning(M, what):
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularError(f"{what} is singular (condition number {cond:.3g})")


def resolve_flow_direction(model: rb.RobotModel, state, tau_phi, mode="fwd", eps: float = POWER_EPS):
    """Per-coupling flow from the rotor input power ``tau_phi[i] * phid[i]``.

    Positive power drives forward, negative power means the rotor is being
    backdriven; within ``eps`` watts the whole-system ``mode`` decides.
    """
    mode = FlowDirection.parse(mode)
    power = np.asarray(tau_phi, dtype=float) * np.asarray(state.phid, dtype=float)
    directions = tuple(
        FlowDirection.FWD if p > eps else FlowDirection.BWD if p < -eps else mode for p in power
    )
    return flow_assignment(model.transmissions, directions)


def reduce_matrices(H_s, c_s, t: TransmissionSet, flow, b: int) -> DissipativeDynamics:
    """Project redundant-system matrices onto the reduced coordinates."""
    H_s = np.asarray(H_s, dtype=float)
    c_s = np.asarray(c_s, dtype=float)
    n_s = b + 2 * t.m
    if H_s.shape != (n_s, n_s) or c_s.shape != (n_s,):
        raise ModelError(f"redundant matrices must have dimension {n_s}")
    fa = flow_assignment(t, flow)
    A, K, B_m = constraint_matrices(b, t)
    E_s, E_m = efficiency_matrices(t, fa, b)
    P = K.T @ E_s
    act = np.zeros((b + t.m, t.m))
    act[b:] = B_m @ E_m
    return DissipativeDynamics(P @ H_s @ K, P @ c_s, act, fa, K, E_s, B_m, b)


def assemble(model: rb.RobotModel, q, qd=None, flow="fwd") -> DissipativeDynamics:
    q = np.asarray(q, dtype=float)
    qd = np.zeros_like(q) if qd is None else np.asarray(qd, dtype=float)
    return reduce_matrices(
        rb.mass_matrix_redundant(model, q),
        rb.bias_forces(model, q, qd),
        model.transmissions,
        flow,
        model.b,
    )


def forward_dynamics(dd: DissipativeDynamics, tau_phi=None, f_ext=None, J=None) -> np.ndarray:
    """Generalized accelerations ``q''`` of the reduced system."""
    rhs = -dd.c.copy()
    if tau_phi is not None:
        rhs += dd.actuation_map @ np.asarray(tau_phi, dtype=float)
    if f_ext is not None:
        if J is None:
            raise ModelError("an external force needs its contact Jacobian")
        rhs += np.asarray(J, dtype=float).T @ np.asarray(f_ext, dtype=float)
    return dd.solve(rhs)


def redundant_acceleration(dd: DissipativeDynamics, qdd) -> np.ndarray:
    """Lift reduced accelerations to ``s''`` (the constraint is linear)."""
    return dd.K @ np.asarray(qdd, dtype=float)


def meshing_forces(model: rb.RobotModel, state, sdd, tau_s) -> np.ndarray:
    """r = H_s s'' + c_s - tau_s, the constraint plus dissipative forces."""
    H_s = rb.mass_matrix_redundant(model, state.q)
    c_s = rb.bias_forces(model, state.q, state.qd)
    return H_s @ np.asarray(sdd, dtype=float) + c_s - np.asarray(tau_s, dtype=float)


def meshing_split(model: rb.RobotModel, r, lam) -> np.ndarray:
    """Dissipative part ``tau_d = r - A^T lam`` given known multipliers."""
    A, _, _ = constraint_matrices(model.b, model.transmissions)
    return np.asarray(r, dtype=float) - A.T @ np.asarray(lam, dtype=float)


def generalized_forces(model: rb.RobotModel, q, tau_phi=None, f_ext=None) -> np.ndarray:
    """tau_s: external contact force mapped onto ``(q_b, q_m)``, rotor torques on ``phi``."""
    tau_s = np.zeros(model.n_redundant)
    if f_ext is not None:
        tau_s[: model.n_reduced] = rb.contact_jacobian(model, q).T @ np.asarray(f_ext, dtype=float)
    if tau_phi is not None:
        tau_s[model.n_reduced :] = np.asarray(tau_phi, dtype=float)
    return tau_s


def efficiency_null_residual(K, E_s, r) -> np.ndarray:
    return np.asarray(K).T @ np.asarray(E_s) @ np.asarray(r, dtype=float)


def virtual_task_force_torques(dd: DissipativeDynamics, J, f_task) -> np.ndarray:
    """Rotor torques ``B_m^-1 J^T f`` producing a virtual task-space force.

    Only defined for fixed-base systems.
    """
    if dd.b != 0:
        raise ModelError("virtual task-space force requires a fixed base (b = 0)")
    _check_conditioning(dd.B_m, "distribution matrix B_m")
    J = np.atleast_2d(np.asarray(J, dtype=float))
    return np.linalg.solve(dd.B_m, J.T @ np.asarray(f_task, dtype=float))


def conventional(model: rb.RobotModel, q, qd=None) -> DissipativeDynamics:
    """Reduced dynamics with every efficiency set to one."""
    return assemble(model.lossless(), q, qd, "fwd")


def symmetric_part(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def task_inverse_inertia(dd: DissipativeDynamics, J, right: Optional[np.ndarray] = None) -> np.ndarray:
    """J H^-1 (right) J^T, with ``right`` inserted between H^-1 and J^T."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    JT = J.T if right is None else right @ J.T
    return J @ dd.solve(JT)
