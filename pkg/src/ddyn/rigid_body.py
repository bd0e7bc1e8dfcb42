"""Planar floating-base serial chains with geared rotors.

Generalized coordinates of the reduced system are ``q = (q_b, q_m)`` where
``q_b = (x, z, pitch)`` for a floating base (``b = 3``) and is empty for a
fixed base (``b = 0``). The redundant system appends the rotor angles,
``s = (q_b, q_m, phi)``.

Link ``i`` points along ``(cos th_i, sin th_i)`` in the x-z plane with
``th_i = pitch + chain_angle + q_1 + ... + q_i``. The first joint sits at the
base origin shifted by ``hip_offset`` (base frame).
"""

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import ModelError
from .transmission import TransmissionSet


@dataclass(frozen=True)
class PlanarBody:
    mass: float
    inertia_com: float
    length: float = 0.0
    com_offset: float = 0.0

    def __post_init__(self):
        if not self.mass >= 0:
            raise ModelError(f"body mass must be non-negative, got {self.mass}")
        if not self.inertia_com >= 0:
            raise ModelError(f"body inertia must be non-negative, got {self.inertia_com}")
        if not self.length >= 0:
            raise ModelError(f"body length must be non-negative, got {self.length}")
        if not 0 <= self.com_offset <= self.length:
            raise ModelError(
                f"COM offset {self.com_offset} must lie within the link length {self.length}"
            )

    @classmethod
    def uniform_rod(cls, mass: float, length: float) -> "PlanarBody":
        return cls(mass, mass * length**2 / 12.0, length, length / 2.0)

    @classmethod
    def uniform_square(cls, mass: float, side: float) -> "PlanarBody":
        return cls(mass, mass * side**2 / 6.0, side, 0.0)


def _readonly(values, name, length=None):
    arr = np.array(values, dtype=float).reshape(-1)
    if length is not None and arr.size != length:
        raise ModelError(f"{name} must have length {length}, got {arr.size}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Planar robot: base, serial links, one geared rotor per joint.

    ``torque_limits`` are peak motor torques after the reduction; the
    corresponding rotor-side bounds are ``torque_limits / N``. ``pose`` and
    ``base_pose`` are the default configuration used by analyses; with a
    fixed base, ``base_pose`` also places the base in the world.
    """

    base: PlanarBody
    b: int
    links: Tuple[PlanarBody, ...]
    rotor_inertias: np.ndarray
    transmissions: TransmissionSet
    gravity: float = 9.81
    torque_limits: Optional[np.ndarray] = None
    chain_angle: float = 0.0
    hip_offset: Tuple[float, float] = (0.0, 0.0)
    pose: Optional[np.ndarray] = None
    base_pose: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    name: str = field(default="robot")

    def __post_init__(self):
        if self.b not in (0, 3):
            raise ModelError(f"base DoF must be 0 (fixed) or 3 (planar floating), got {self.b}")
        links = tuple(self.links)
        m = len(links)
        if m < 1:
            raise ModelError("model needs at least one link")
        if self.transmissions.m != m:
            raise ModelError(
                f"transmission has {self.transmissions.m} joints but the chain has {m} links"
            )
        rotors = _readonly(self.rotor_inertias, "rotor_inertias", m)
        if np.any(~(rotors >= 0)):
            raise ModelError("rotor inertias must be non-negative")
        limits = None
        if self.torque_limits is not None:
            limits = _readonly(self.torque_limits, "torque_limits", m)
            if np.any(~(limits > 0)):
                raise ModelError("torque limits must be positive")
        pose = _readonly(np.zeros(m) if self.pose is None else self.pose, "pose", m)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "rotor_inertias", rotors)
        object.__setattr__(self, "torque_limits", limits)
        object.__setattr__(self, "pose", pose)
        object.__setattr__(self, "hip_offset", tuple(float(v) for v in self.hip_offset))
        object.__setattr__(self, "base_pose", tuple(float(v) for v in self.base_pose))
        if len(self.hip_offset) != 2 or len(self.base_pose) != 3:
            raise ModelError("hip_offset needs 2 entries and base_pose 3 entries")
        geometry = tuple(
            np.array([getattr(link, attr) for link in links])
            for attr in ("length", "com_offset", "mass", "inertia_com")
        )
        object.__setattr__(self, "_geometry", geometry)

    @property
    def m(self) -> int:
        return len(self.links)

    @property
    def n_reduced(self) -> int:
        return self.b + self.m

    @property
    def n_redundant(self) -> int:
        return self.b + 2 * self.m

    @property
    def rotor_torque_limits(self) -> Optional[np.ndarray]:
        if self.torque_limits is None:
            return None
        return self.torque_limits / self.transmissions.N

    def default_q(self) -> np.ndarray:
        """Reduced coordinates of the stored default configuration."""
        if self.b == 0:
            return np.array(self.pose, dtype=float)
        return np.concatenate([self.base_pose, self.pose])

    def locked_base(self, q=None) -> "RobotModel":
        """Fixed-base copy with the base frozen at the pose in ``q``."""
        if self.b == 0:
            return self
        q = self.default_q() if q is None else np.asarray(q, dtype=float)
        return replace(self, b=0, base_pose=tuple(q[:3]), pose=q[3:])

    def with_transmissions(self, t: TransmissionSet) -> "RobotModel":
        return replace(self, transmissions=t)

    def lossless(self) -> "RobotModel":
        return replace(self, transmissions=self.transmissions.lossless())

    def __eq__(self, other):
        if not isinstance(other, RobotModel):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(np.asarray(a), np.asarray(b))

        return (
            self.base == other.base
            and self.b == other.b
            and self.links == other.links
            and same(self.rotor_inertias, other.rotor_inertias)
            and self.transmissions == other.transmissions
            and self.gravity == other.gravity
            and same(self.torque_limits, other.torque_limits)
            and self.chain_angle == other.chain_angle
            and self.hip_offset == other.hip_offset
            and same(self.pose, other.pose)
            and self.base_pose == other.base_pose
        )


class SystemState(NamedTuple):
    """Redundant state: reduced positions/velocities plus rotor angles/rates."""

    q: np.ndarray
    qd: np.ndarray
    phi: np.ndarray
    phid: np.ndarray

    @classmethod
    def from_reduced(cls, model: RobotModel, q, qd=None) -> "SystemState":
        """Consistent state with rotors placed by ``phi = (D R)^-1 q_m``."""
        q = np.asarray(q, dtype=float)
        qd = np.zeros_like(q) if qd is None else np.asarray(qd, dtype=float)
        DR_inv = np.linalg.inv(model.transmissions.DR)
        return cls(q, qd, DR_inv @ q[model.b :], DR_inv @ qd[model.b :])

    @property
    def s(self) -> np.ndarray:
        return np.concatenate([self.q, self.phi])

    @property
    def sd(self) -> np.ndarray:
        return np.concatenate([self.qd, self.phid])

    def constraint_residual(self, model: RobotModel) -> float:
        DR = model.transmissions.DR
        return float(np.max(np.abs(self.q[model.b :] - DR @ self.phi)))


def _perp(v):
    return np.array([-v[1], v[0]])


def _rot(th):
    c, s = np.cos(th), np.sin(th)
    return np.array([[c, -s], [s, c]])


class _Chain(NamedTuple):
    base_origin: np.ndarray
    pitch: float
    joints: np.ndarray  # (m+1, 2): joint positions, last row is the foot
    angles: np.ndarray  # (m,) absolute link angles
    coms: np.ndarray  # (m, 2)


def _split(model: RobotModel, q):
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != model.n_reduced:
        raise ModelError(f"expected {model.n_reduced} generalized coordinates, got {q.size}")
    if model.b == 3:
        return q[:2], q[2], q[3:]
    return np.array(model.base_pose[:2]), model.base_pose[2], q


def _chain(model: RobotModel, q) -> _Chain:
    origin, pitch, qm = _split(model, q)
    angles = pitch + model.chain_angle + np.cumsum(qm)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    joints = np.empty((model.m + 1, 2))
    joints[0] = origin + _rot(pitch) @ np.asarray(model.hip_offset)
    lengths, offsets = model._geometry[:2]
    joints[1:] = joints[0] + np.cumsum(lengths[:, None] * dirs, axis=0)
    coms = joints[:-1] + offsets[:, None] * dirs
    return _Chain(origin, pitch, joints, angles, coms)


def _point_jacobian(model: RobotModel, chain: _Chain, link: int, point) -> np.ndarray:
    """2 x (b+m) Jacobian of a point rigidly attached to ``link``."""
    b = model.b
    J = np.zeros((2, model.n_reduced))
    if b == 3:
        J[:, :2] = np.eye(2)
        J[:, 2] = _perp(point - chain.base_origin)
    for j in range(link + 1):
        J[:, b + j] = _perp(point - chain.joints[j])
    return J


def body_poses(model: RobotModel, q):
    """World COM positions and pitch angles of every moving body.

    Returns ``(positions (k, 2), angles (k,), masses (k,), inertias (k,))``
    with the base first when it floats.
    """
    ch = _chain(model, q)
    pos, ang, mass, inertia = [], [], [], []
    if model.b == 3:
        pos.append(ch.base_origin)
        ang.append(ch.pitch)
        mass.append(model.base.mass)
        inertia.append(model.base.inertia_com)
    for i, link in enumerate(model.links):
        pos.append(ch.coms[i])
        ang.append(ch.angles[i])
        mass.append(link.mass)
        inertia.append(link.inertia_com)
    return np.array(pos), np.array(ang), np.array(mass), np.array(inertia)


def foot_position(model: RobotModel, q) -> np.ndarray:
    return _chain(model, q).joints[-1].copy()


def _terms(model: RobotModel, q, qd=None, gravity: float = 0.0):
    """Mass matrix and (if ``qd`` is given) bias forces of the bodies.

    Bias forces are ``sum_i m_i Jv_i^T (a_i + g)`` with ``a_i`` the COM
    acceleration at zero generalized acceleration; link rates are constant
    along each column of the rate Jacobian, so it adds no bias term.
    """
    ch = _chain(model, q)
    b, m, n = model.b, model.m, model.n_reduced
    lengths, offsets, masses, inertias = model._geometry
    diff = (ch.coms[:, None, :] - ch.joints[None, :m, :]) * _lower(m)[:, :, None]
    Jv = np.zeros((m, 2, n))
    Jv[:, 0, b:] = -diff[:, :, 1]
    Jv[:, 1, b:] = diff[:, :, 0]
    Jw = np.zeros((m, n))
    Jw[:, b:] = _lower(m)
    if b == 3:
        arm = ch.coms - ch.base_origin
        Jv[:, 0, 0] = 1.0
        Jv[:, 1, 1] = 1.0
        Jv[:, 0, 2] = -arm[:, 1]
        Jv[:, 1, 2] = arm[:, 0]
        Jw[:, 2] = 1.0
    flat = Jv.reshape(2 * m, n)
    H = (flat * np.repeat(masses, 2)[:, None]).T @ flat + (Jw.T * inertias) @ Jw
    if b == 3:
        H[0, 0] += model.base.mass
        H[1, 1] += model.base.mass
        H[2, 2] += model.base.inertia_com
    if qd is None:
        return H, None
    qd = np.asarray(qd, dtype=float).reshape(-1)
    pitch_rate = qd[2] if b == 3 else 0.0
    rates_sq = (pitch_rate + np.cumsum(qd[b:])) ** 2
    dirs = np.column_stack([np.cos(ch.angles), np.sin(ch.angles)])
    hip_acc = -pitch_rate**2 * (ch.joints[0] - ch.base_origin)
    joint_acc = np.vstack([hip_acc, hip_acc - np.cumsum((lengths * rates_sq)[:, None] * dirs, axis=0)])
    a_com = joint_acc[:-1] - (offsets * rates_sq)[:, None] * dirs
    a_com[:, 1] += gravity
    c = np.einsum("iak,ia->k", Jv, masses[:, None] * a_com)
    if b == 3:
        c[1] += model.base.mass * gravity
    return H, c


_LOWER = {}


def _lower(m):
    if m not in _LOWER:
        _LOWER[m] = np.tril(np.ones((m, m)))
    return _LOWER[m]


def mass_matrix(model: RobotModel, q) -> np.ndarray:
    """Reduced-coordinate mass matrix of the bodies alone (no rotors)."""
    return _terms(model, q)[0]


def _embed(model: RobotModel, H, c):
    n = model.n_reduced
    H_s = np.zeros((model.n_redundant, model.n_redundant))
    H_s[:n, :n] = H
    H_s[n:, n:] = np.diag(model.rotor_inertias)
    if c is None:
        return H_s, None
    c_s = np.zeros(model.n_redundant)
    c_s[:n] = c
    return H_s, c_s


def mass_matrix_redundant(model: RobotModel, q) -> np.ndarray:
    """H_s over ``s = (q_b, q_m, phi)``; rotors appear as decoupled inertias."""
    return _embed(model, mass_matrix(model, q), None)[0]


def redundant_terms(model: RobotModel, q, qd):
    """``(H_s, c_s)`` in one kinematic pass."""
    return _embed(model, *_terms(model, q, qd, model.gravity))


def bias_forces(model: RobotModel, q, qd) -> np.ndarray:
    """Coriolis, centrifugal and gravity forces ``c_s`` in redundant coordinates.

    Rotor entries are zero: rotors spin about fixed axes and carry no weight.
    """
    return redundant_terms(model, q, qd)[1]


def gravity_forces(model: RobotModel, q) -> np.ndarray:
    return bias_forces(model, q, np.zeros(model.n_reduced))


def coriolis_forces(model: RobotModel, q, qd) -> np.ndarray:
    return _embed(model, *_terms(model, q, qd, 0.0))[1]


def potential_energy(model: RobotModel, q) -> float:
    pos, _, mass, _ = body_poses(model, q)
    return float(model.gravity * np.dot(mass, pos[:, 1]))


def contact_jacobian(model: RobotModel, q) -> np.ndarray:
    """2 x (b+m) Jacobian of the foot point (tip of the last link)."""
    ch = _chain(model, q)
    return _point_jacobian(model, ch, model.m - 1, ch.joints[-1])


def limb_jacobian(model: RobotModel, q) -> np.ndarray:
    """Joint columns of the contact Jacobian (base held still)."""
    return contact_jacobian(model, q)[:, model.b :]


def is_singular_pose(model: RobotModel, q, tol: float = 1e-9) -> bool:
    """True when the limb Jacobian loses rank (e.g. a fully stretched leg)."""
    J = limb_jacobian(model, q)
    sv = np.linalg.svd(J, compute_uv=False)
    return bool(sv[-1] <= tol * max(1.0, sv[0]))
