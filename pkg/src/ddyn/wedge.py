"""Wedge-block model of a lossy transmission.

A block of mass ``M`` sliding along ``x`` is pushed by a wedge of mass ``m``
sliding along ``u``; the incline couples them through ``x = u cos(alpha)``,
so ``1/cos(alpha)`` plays the role of a gear ratio. Coulomb friction at the
contact makes the reduced 1-DoF dynamics depend on which body is driving.

Sign convention: ``f_u`` is reported along the wedge's pushing direction,
which moves the block towards negative ``x``. The generalized force on the
``u`` coordinate is therefore ``-f_u``.
"""

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np

from .errors import ForwardLockedError, ModelError, NumericError
from .flow import FlowDirection

ForceInput = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class WedgeParams:
    M: float
    m: float
    alpha: float
    mu: float

    def __post_init__(self):
        if not self.M > 0 or not self.m > 0:
            raise ModelError(f"masses must be positive (M={self.M}, m={self.m})")
        if not self.mu >= 0:
            raise ModelError(f"friction coefficient must be non-negative, got {self.mu}")
        if not 0 <= self.alpha < math.pi / 2:
            raise ModelError(f"incline angle must lie in [0, pi/2), got {self.alpha}")

    @property
    def gear_ratio(self) -> float:
        return 1.0 / math.cos(self.alpha)

    @property
    def loss_factor(self) -> float:
        """mu * tan(alpha)"""
        return self.mu * math.tan(self.alpha)


class WedgeEfficiencies(NamedTuple):
    eta_f: float
    eta_b: float

    @property
    def forward_locked(self) -> bool:
        return self.eta_f <= 0


def efficiencies(p: WedgeParams) -> WedgeEfficiencies:
    """Forward and backward efficiency of the wedge contact.

    A non-positive ``eta_f`` is returned as-is; check ``forward_locked``.
    """
    k = p.loss_factor
    return WedgeEfficiencies(1.0 - k, 1.0 / (1.0 + k))


def effective_efficiency(p: WedgeParams, direction) -> float:
    """Efficiency entering the efficiency matrix: eta_f (FWD) or 1/eta_b (BWD)."""
    direction = FlowDirection.parse(direction)
    eff = efficiencies(p)
    return eff.eta_f if direction is FlowDirection.FWD else 1.0 / eff.eta_b


def reduced_acceleration(p: WedgeParams, direction, f_x: float, f_u: float) -> float:
    eta = effective_efficiency(p, direction)
    c = math.cos(p.alpha)
    return (f_x - eta * f_u / c) / (p.M + eta * p.m / c**2)


def impedance_coefficient(p: WedgeParams, direction) -> float:
    """Coefficient ``c`` of the mechanical impedance ``X(s) = c s``.

    FWD is seen from the wedge side (force projected on x over block
    velocity), BWD from the block side.
    """
    direction = FlowDirection.parse(direction)
    eff = efficiencies(p)
    reflected = p.m / math.cos(p.alpha) ** 2
    if direction is FlowDirection.FWD:
        if eff.forward_locked:
            raise ForwardLockedError(
                f"forward-locked wedge (eta_f={eff.eta_f:.6g}); forward impedance undefined"
            )
        return p.M / eff.eta_f + reflected
    return p.M + reflected / eff.eta_b


@dataclass
class WedgeTrajectory:
    """Sampled oracle trajectory; row ``k`` holds the state at ``t[k]``.

    ``xdd``, ``udd`` and ``lam`` hold the accelerations and contact normal
    force solved at ``t[k]`` (the last row repeats the final solve).
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    xd: np.ndarray
    ud: np.ndarray
    xdd: np.ndarray
    udd: np.ndarray
    lam: np.ndarray
    friction: np.ndarray
    f_x: np.ndarray
    f_u: np.ndarray
    cos_alpha: float

    def flow(self, k: int) -> FlowDirection:
        """Physical flow direction at sample ``k`` from the sign of lam * xd.

        The wedge does positive work on the block (FWD) when the contact
        force ``-lam`` on the block is aligned with its velocity.
        """
        return FlowDirection.FWD if self.lam[k] * self.xd[k] < 0 else FlowDirection.BWD

    def meshing_forces(self) -> np.ndarray:
        """r = H_s s'' - f for every sample, shape (n, 2)."""
        return np.column_stack([-self.lam + self.friction, self.cos_alpha * self.lam])


def _as_function(f: ForceInput) -> Callable[[float], float]:
    if callable(f):
        return f
    value = float(f)
    return lambda t: value


def simulate_redundant(
    p: WedgeParams,
    f_x: ForceInput,
    f_u: ForceInput,
    dt: float,
    steps: int,
    x0: float = 0.0,
    xd0: float = 0.0,
    smoothing: float = 1e-5,
) -> WedgeTrajectory:
    """Integrate the two-body wedge system with an explicit contact multiplier.

    Coordinates ``s = (x, u)`` are kept redundant; each step solves the
    3x3 system for ``(x'', u'', lam)`` with the constraint ``x'' = cos(a) u''``
    and Coulomb friction of magnitude ``mu tan(a) |lam|`` acting on the block,
    signed against its velocity through ``tanh(xd / smoothing)``. Integration
    is semi-implicit Euler.
    """
    if not dt > 0:
        raise ModelError(f"dt must be positive, got {dt}")
    if not smoothing > 0:
        raise ModelError(f"smoothing width must be positive, got {smoothing}")
    if steps < 1:
        raise ModelError(f"steps must be >= 1, got {steps}")
    fx_of = _as_function(f_x)
    fu_of = _as_function(f_u)
    c = math.cos(p.alpha)
    kappa = p.loss_factor

    n = steps + 1
    out = {k: np.zeros(n) for k in ("t", "x", "u", "xd", "ud", "xdd", "udd", "lam", "fr", "fx", "fu")}
    x, xd = float(x0), float(xd0)
    u, ud = x / c, xd / c
    lam_sign = 1.0

    # rows: block, wedge, constraint (x'' - cos(a) u'' = 0)
    kkt = np.array([[p.M, 0.0, 1.0], [0.0, p.m, -c], [1.0, -c, 0.0]])
    rhs = np.zeros(3)
    for k in range(n):
        t = k * dt
        fx, fu = fx_of(t), fu_of(t)
        sigma = math.tanh(xd / smoothing)
        rhs[0], rhs[1] = fx, -fu
        for _ in range(2):
            # friction on the block: -kappa * sigma * |lam| = beta * lam
            beta = -kappa * sigma * lam_sign
            kkt[0, 2] = 1.0 - beta
            try:
                xdd, udd, lam = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError as exc:
                raise NumericError(f"singular contact solve at step {k}") from exc
            if lam == 0 or math.copysign(1.0, lam) == lam_sign:
                break
            lam_sign = -lam_sign
        out["t"][k], out["x"][k], out["u"][k], out["xd"][k], out["ud"][k] = t, x, u, xd, ud
        out["xdd"][k], out["udd"][k], out["lam"][k] = xdd, udd, lam
        out["fr"][k] = beta * lam
        out["fx"][k], out["fu"][k] = fx, fu
        if k == steps:
            break
        xd += xdd * dt
        ud += udd * dt
        x += xd * dt
        u += ud * dt

    return WedgeTrajectory(
        out["t"], out["x"], out["u"], out["xd"], out["ud"], out["xdd"], out["udd"],
        out["lam"], out["fr"], out["fx"], out["fu"], c,
    )


def efficiency_null(p: WedgeParams, r: np.ndarray, direction) -> np.ndarray:
    """K^T E_r r for wedge meshing forces ``r`` of shape (2,) or (n, 2)."""
    eta = effective_efficiency(p, direction)
    r = np.asarray(r, dtype=float)
    return r[..., 0] + eta * r[..., 1] / math.cos(p.alpha)
