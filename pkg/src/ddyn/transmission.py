"""Reductions, actuation topologies and transmission efficiencies.

Rotor angles ``phi`` map to motor angles ``psi = R phi`` through the
reduction ``R = diag(1/N)``, and motor angles map to joint angles
``q = D psi`` through the actuation topology ``D``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import ModelError, SingularError
from .flow import FlowDirection

COND_LIMIT = 1e12


class EfficiencyMap:
    """Backward efficiency as a function of forward efficiency.

    Without a table this is the closed-form approximation
    ``eta_b = max(0, 2 - 1/eta_f)``, which is 1 at ``eta_f = 1`` and locks
    (``eta_b = 0``) at ``eta_f = 0.5``. With a table of ``(eta_f, eta_b)``
    pairs the map interpolates linearly and clamps at the table ends.
    """

    def __init__(self, table: Optional[Sequence[Sequence[float]]] = None):
        if table is None:
            self.table = None
        else:
            arr = np.asarray(table, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 2:
                raise ModelError("efficiency map table needs at least two (eta_f, eta_b) rows")
            if np.any(np.diff(arr[:, 0]) <= 0):
                raise ModelError("efficiency map eta_f column must be strictly increasing")
            if np.any(arr[:, 1] < 0) or np.any(arr[:, 1] > 1):
                raise ModelError("efficiency map eta_b values must lie in [0, 1]")
            self.table = arr

    @property
    def is_default(self) -> bool:
        return self.table is None

    @property
    def label(self) -> str:
        return "approx: eta_b = max(0, 2 - 1/eta_f)" if self.table is None else "tabulated"

    def __call__(self, eta_f):
        return backward_from_forward(eta_f, self)

    def __eq__(self, other):
        if not isinstance(other, EfficiencyMap):
            return NotImplemented
        if self.table is None or other.table is None:
            return self.table is None and other.table is None
        return self.table.shape == other.table.shape and bool(np.all(self.table == other.table))

    def __repr__(self):
        return f"EfficiencyMap({None if self.table is None else self.table.tolist()})"


DEFAULT_MAP = EfficiencyMap()


def backward_from_forward(eta_f, emap: Optional[EfficiencyMap] = None):
    """Backward efficiency for forward efficiency ``eta_f`` in (0, 1].

    Accepts scalars or arrays; a result of 0 means the drive cannot be
    backdriven.
    """
    emap = DEFAULT_MAP if emap is None else emap
    arr = np.asarray(eta_f, dtype=float)
    if np.any(~(arr > 0)) or np.any(arr > 1):
        raise ModelError(f"forward efficiency must lie in (0, 1], got {eta_f}")
    if emap.table is None:
        out = np.maximum(0.0, 2.0 - 1.0 / arr)
    else:
        out = np.interp(arr, emap.table[:, 0], emap.table[:, 1])
    return float(out) if out.ndim == 0 else out


def _vector(values, m, name):
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (m,):
        raise ModelError(f"{name} must have length {m}, got {arr.size}")
    return arr


@dataclass(frozen=True, eq=False)
class TransmissionSet:
    """Per-joint gear ratios, efficiencies and actuation topology.

    ``eta_b`` defaults to the efficiency map applied to ``eta_f``.
    """

    N: np.ndarray
    eta_f: np.ndarray
    eta_b: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    efficiency_map: EfficiencyMap = field(default=DEFAULT_MAP)

    def __post_init__(self):
        N = np.array(self.N, dtype=float).reshape(-1)
        m = N.size
        if m < 1:
            raise ModelError("transmission needs at least one joint")
        if np.any(~(N >= 1)):
            raise ModelError(f"gear ratios must be >= 1, got {N.tolist()}")
        eta_f = _vector(self.eta_f, m, "eta_f")
        if np.any(~(eta_f > 0)) or np.any(eta_f > 1):
            raise ModelError(f"forward efficiencies must lie in (0, 1], got {eta_f.tolist()}")
        if self.eta_b is None:
            eta_b = np.atleast_1d(backward_from_forward(eta_f, self.efficiency_map)).astype(float)
        else:
            eta_b = _vector(self.eta_b, m, "eta_b")
        if np.any(~(eta_b > 0)) or np.any(eta_b > 1):
            raise ModelError(
                f"backward efficiencies must lie in (0, 1], got {eta_b.tolist()} (locked drive?)"
            )
        D = np.eye(m) if self.D is None else np.array(self.D, dtype=float)
        if D.shape != (m, m):
            raise ModelError(f"topology D must be {m}x{m}, got shape {D.shape}")
        for name, value in (("N", N), ("eta_f", eta_f), ("eta_b", eta_b), ("D", D)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        _check_invertible(self.DR, "actuation topology D R")

    @property
    def m(self) -> int:
        return self.N.size

    @property
    def R(self) -> np.ndarray:
        return np.diag(1.0 / self.N)

    @property
    def DR(self) -> np.ndarray:
        return self.D @ self.R

    def effective_eta(self, flow) -> np.ndarray:
        return flow_assignment(self, flow).effective_eta

    def with_efficiencies(self, eta_f, eta_b=None) -> "TransmissionSet":
        return TransmissionSet(self.N, eta_f, eta_b, self.D, self.efficiency_map)

    def lossless(self) -> "TransmissionSet":
        ones = np.ones(self.m)
        return TransmissionSet(self.N, ones, ones, self.D, self.efficiency_map)

    def __eq__(self, other):
        if not isinstance(other, TransmissionSet):
            return NotImplemented
        return (
            np.array_equal(self.N, other.N)
            and np.array_equal(self.eta_f, other.eta_f)
            and np.array_equal(self.eta_b, other.eta_b)
            and np.array_equal(self.D, other.D)
            and self.efficiency_map == other.efficiency_map
        )


def _check_invertible(M, what):
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularError(f"{what} is singular (condition number {cond:.3g})")


class FlowAssignment(NamedTuple):
    directions: tuple
    effective_eta: np.ndarray


FlowLike = Union[FlowDirection, str, Sequence[Union[FlowDirection, str]], FlowAssignment]


def flow_assignment(t: TransmissionSet, flow: FlowLike) -> FlowAssignment:
    """Expand a whole-system mode or per-coupling directions into efficiencies.

    Entry ``i`` of ``effective_eta`` is ``eta_f[i]`` for FWD and
    ``1/eta_b[i]`` for BWD.
    """
    if isinstance(flow, FlowAssignment):
        directions = flow.directions
    elif isinstance(flow, (FlowDirection, str)):
        directions = (FlowDirection.parse(flow),) * t.m
    else:
        directions = tuple(FlowDirection.parse(d) for d in flow)
    if len(directions) != t.m:
        raise ModelError(f"flow assignment needs {t.m} directions, got {len(directions)}")
    eta = np.array(
        [t.eta_f[i] if d is FlowDirection.FWD else 1.0 / t.eta_b[i] for i, d in enumerate(directions)]
    )
    return FlowAssignment(directions, eta)


class ConstraintMatrices(NamedTuple):
    A: np.ndarray
    K: np.ndarray
    B_m: np.ndarray


def constraint_matrices(b: int, t: TransmissionSet) -> ConstraintMatrices:
    """Constraint Jacobian A, its nullspace K, and distribution matrix B_m.

    Redundant coordinates are ``s = (q_b, q_m, phi)``, reduced coordinates
    ``q = (q_b, q_m)``, and the transmission constraint is
    ``q_m - D R phi = 0``.
    """
    if b < 0:
        raise ModelError(f"base DoF must be non-negative, got {b}")
    m = t.m
    DR = t.DR
    _check_invertible(DR, "actuation topology D R")
    DR_inv = np.linalg.inv(DR)
    A = np.hstack([np.zeros((m, b)), np.eye(m), -DR])
    K = np.zeros((b + 2 * m, b + m))
    K[: b + m, : b + m] = np.eye(b + m)
    K[b + m :, b:] = DR_inv
    return ConstraintMatrices(A, K, DR_inv.T)


def efficiency_matrices(t: TransmissionSet, flow: FlowLike, b: int):
    """Return ``(E_s, E_m)``: redundant-system and rotor efficiency matrices."""
    eta = flow_assignment(t, flow).effective_eta
    E_s = np.diag(np.concatenate([np.ones(b + t.m), eta]))
    return E_s, np.diag(eta)


class CoordinateChain(NamedTuple):
    R: np.ndarray
    D: np.ndarray
    J: np.ndarray

    @property
    def composition(self) -> np.ndarray:
        return self.J @ self.D @ self.R

    def rotor_to_motor(self, dphi):
        return self.R @ np.asarray(dphi, dtype=float)

    def rotor_to_joint(self, dphi):
        return self.D @ self.rotor_to_motor(dphi)

    def rotor_to_task(self, dphi):
        return self.composition @ np.asarray(dphi, dtype=float)


def coordinate_chain(t: TransmissionSet, J=None) -> CoordinateChain:
    """Linear maps rotor -> motor -> joint -> task displacement.

    ``J`` defaults to the identity (task space = joint space).
    """
    J = np.eye(t.m) if J is None else np.atleast_2d(np.asarray(J, dtype=float))
    if J.shape[1] != t.m:
        raise ModelError(f"task Jacobian needs {t.m} columns, got shape {J.shape}")
    return CoordinateChain(t.R, t.D, J)
