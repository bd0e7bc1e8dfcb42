"""Task-space design metrics with direction-dependent transmission losses.

* generalized inertia tensor (GIT): conventional, forward-driven, backdriven
* force capability polytopes mapped through the efficiency matrix
* directional impact mitigation factor (IMF)
* efficiency sweeps combining the last two
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import List, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from . import dissipative as dv
from . import rigid_body as rb
from .errors import ModelError, NumericError, SingularError
from .flow import FlowDirection
from .transmission import COND_LIMIT, backward_from_forward, constraint_matrices, efficiency_matrices


class Variant(str, Enum):
    CONVENTIONAL = "conventional"
    FORWARD = "forward"
    BACKWARD = "backward"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ModelError(f"unknown metric variant {value!r}") from None


def _inv(M, what):
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularError(f"{what} is singular (condition number {cond:.3g})")
    return np.linalg.inv(M)


@dataclass(frozen=True)
class InertiaTensorResult:
    tensor: np.ndarray
    variant: Variant
    backward_uses_efficiency: bool = True

    @property
    def symmetric_part(self) -> np.ndarray:
        return dv.symmetric_part(self.tensor)

    @property
    def is_symmetric(self) -> bool:
        return bool(np.max(np.abs(self.tensor - self.tensor.T)) <= 1e-12 * max(1.0, np.max(np.abs(self.tensor))))

    def directional(self, n) -> float:
        n = np.asarray(n, dtype=float)
        return float(n @ self.tensor @ n)


def _task_jacobian(J, task_directions):
    if task_directions is None:
        return J
    T = np.atleast_2d(np.asarray(task_directions, dtype=float))
    if T.shape[1] != J.shape[0]:
        raise ModelError(f"task directions must have {J.shape[0]} columns")
    return T @ J


def git(
    model: rb.RobotModel,
    q=None,
    variant="conventional",
    backward_uses_efficiency: bool = True,
    task_directions=None,
):
    """Inertia felt at the foot, ``(J H^-1 J^T)^-1`` and its lossy variants.

    ``task_directions`` (rows) restricts the task space, e.g. to the
    tangential direction of a single link.

    ``Forward`` inserts ``B_m E_m B_m^-1`` between ``H^-1`` and ``J^T`` and is
    only defined for a fixed base. ``Backward`` builds ``H`` with backward
    efficiencies unless ``backward_uses_efficiency`` is False, in which case
    it coincides with the conventional tensor.
    """
    variant = Variant.parse(variant)
    q = model.default_q() if q is None else np.asarray(q, dtype=float)
    J = _task_jacobian(rb.contact_jacobian(model, q), task_directions)
    if np.linalg.matrix_rank(J) < J.shape[0]:
        raise SingularError("contact Jacobian is rank deficient at this pose")
    if variant is Variant.FORWARD and model.b != 0:
        raise ModelError("forward GIT needs a fixed base (b = 0); use model.locked_base()")

    if variant is Variant.CONVENTIONAL or (variant is Variant.BACKWARD and not backward_uses_efficiency):
        dd = dv.conventional(model, q)
        inner = dv.task_inverse_inertia(dd, J)
    elif variant is Variant.BACKWARD:
        dd = dv.assemble(model, q, None, FlowDirection.BWD)
        inner = dv.task_inverse_inertia(dd, J)
    else:
        dd = dv.assemble(model, q, None, FlowDirection.FWD)
        right = dd.B_m @ dd.E_m @ np.linalg.inv(dd.B_m)
        inner = dv.task_inverse_inertia(dd, J, right)
    return InertiaTensorResult(_inv(inner, "task-space inverse inertia"), variant, backward_uses_efficiency)


def _efficiency_for(model: rb.RobotModel, variant: Variant) -> np.ndarray:
    t = model.transmissions
    if variant is Variant.CONVENTIONAL:
        return np.ones(t.m)
    _, E_m = efficiency_matrices(t, FlowDirection.FWD if variant is Variant.FORWARD else FlowDirection.BWD, 0)
    return np.diag(E_m)


def _hull_order(points: np.ndarray) -> np.ndarray:
    if points.shape[1] == 1:
        return np.array([[points.min()], [points.max()]])
    pts = np.unique(np.round(points, 12), axis=0)
    if len(pts) < 3:
        return pts
    try:
        hull = ConvexHull(pts)
    except QhullError:
        # degenerate (collinear) set: keep the two extreme points
        d = pts - pts.mean(axis=0)
        axis = np.linalg.svd(d)[2][0]
        proj = d @ axis
        return pts[[np.argmin(proj), np.argmax(proj)]]
    return pts[hull.vertices]


@dataclass(frozen=True)
class ForcePolytope:
    """Convex set of task-space forces, stored as counter-clockwise vertices."""

    vertices: np.ndarray
    variant: Variant
    method: str = "zonotope"

    def support(self, direction) -> float:
        """max_{f in P} n . f"""
        n = np.asarray(direction, dtype=float)
        return float(np.max(self.vertices @ n))

    @property
    def area(self) -> float:
        v = self.vertices
        if v.shape[1] != 2 or len(v) < 3:
            return 0.0
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        """Boolean mask of points inside (or within ``tol`` of) the polytope."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        scale = max(1.0, float(np.max(np.abs(self.vertices))))
        if self.vertices.shape[1] == 1:
            x = pts[:, 0]
            lo, hi = self.vertices.min(), self.vertices.max()
            return (x >= lo - tol * scale) & (x <= hi + tol * scale)
        hull = ConvexHull(self.vertices)
        # equations: normal . x + offset <= 0 inside
        lhs = pts @ hull.equations[:, :-1].T + hull.equations[:, -1]
        return np.all(lhs <= tol * scale, axis=1)


def _box_vertices(lo, hi):
    return np.array(list(product(*zip(lo, hi))), dtype=float)


def _torque_bounds(model: rb.RobotModel, tau_bounds):
    if tau_bounds is None:
        limits = model.rotor_torque_limits
        if limits is None:
            raise ModelError("model has no torque limits; pass tau_bounds")
        return -limits, limits.copy()
    arr = np.asarray(tau_bounds, dtype=float)
    if arr.ndim == 1:
        arr = np.column_stack([-np.abs(arr), np.abs(arr)])
    if arr.shape != (model.m, 2) or np.any(arr[:, 0] > arr[:, 1]):
        raise ModelError(f"torque bounds must be {model.m} (lo, hi) intervals")
    return arr[:, 0], arr[:, 1]


def _unit_directions(count: int) -> np.ndarray:
    th = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
    return np.column_stack([np.cos(th), np.sin(th)])


def _lp_support(Jm, G, lo, hi, n) -> np.ndarray:
    """argmax_f n.f subject to Jm^T f = G tau, lo <= tau <= hi."""
    k, m = Jm.shape
    c = np.concatenate([-n, np.zeros(m)])
    A_eq = np.hstack([Jm.T, -G])
    bounds = [(None, None)] * k + list(zip(lo, hi))
    res = linprog(c, A_eq=A_eq, b_eq=np.zeros(m), bounds=bounds, method="highs")
    if res.status == 3:
        raise SingularError("force capability is unbounded (singular pose)")
    if not res.success:
        raise NumericError(f"force capability LP failed: {res.message}")
    return res.x[:k]


def force_capability(
    model: rb.RobotModel,
    q=None,
    tau_bounds=None,
    variant="conventional",
    method: str = "auto",
    directions: int = 180,
    task_directions=None,
) -> ForcePolytope:
    """Foot forces balanced quasi-statically by bounded rotor torques.

    The rotor torque box is mapped through ``J_m^-T B_m E_m``; the forward
    variant scales by ``eta_f``, the backward variant by ``1/eta_b``. With a
    square, invertible limb Jacobian the exact zonotope is returned;
    otherwise (or with ``method="lp"``) support points along sampled
    directions are found by linear programming. ``task_directions`` works
    as in :func:`git`; a one-row task space yields an interval.
    """
    variant = Variant.parse(variant)
    q = model.default_q() if q is None else np.asarray(q, dtype=float)
    lo, hi = _torque_bounds(model, tau_bounds)
    Jm = _task_jacobian(rb.limb_jacobian(model, q), task_directions)
    _, _, B_m = constraint_matrices(0, model.transmissions)
    G = B_m @ np.diag(_efficiency_for(model, variant))

    square_ok = Jm.shape[0] == Jm.shape[1] and np.linalg.cond(Jm) < COND_LIMIT
    if method == "auto":
        method = "zonotope" if square_ok else "lp"
    if method == "zonotope":
        if not square_ok:
            raise SingularError("limb Jacobian is not square and invertible; use method='lp'")
        M = np.linalg.solve(Jm.T, G)
        verts = _box_vertices(lo, hi) @ M.T
    elif method == "lp":
        dirs = _unit_directions(directions) if Jm.shape[0] == 2 else np.array([[1.0], [-1.0]])
        if Jm.shape[0] not in (1, 2):
            raise ModelError("LP force capability supports 1-D and 2-D task spaces")
        verts = np.array([_lp_support(Jm, G, lo, hi, n) for n in dirs])
    else:
        raise ModelError(f"unknown force capability method {method!r}")
    return ForcePolytope(_hull_order(verts), variant, method)


@dataclass(frozen=True)
class ImfResult:
    value: float
    direction: np.ndarray
    reference: str = "joints"


def imf(
    model: rb.RobotModel,
    q=None,
    direction=(0.0, 1.0),
    reference: str = "joints",
    backward_uses_efficiency: bool = True,
) -> ImfResult:
    """Directional impact mitigation factor ``1 - n.L_float.n / n.L_ref.n``.

    ``L_float`` is the foot inertia of the floating robot with a backdriven
    transmission. ``L_ref`` is the foot inertia with every joint locked
    (``reference="joints"``, the robot as one rigid body) or with the base
    held fixed (``reference="base"``).
    """
    if model.b != 3:
        raise ModelError("impact mitigation needs a floating base (b = 3)")
    q = model.default_q() if q is None else np.asarray(q, dtype=float)
    n = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(n)
    if not norm > 0:
        raise ModelError("IMF direction must be non-zero")
    n = n / norm
    J = rb.contact_jacobian(model, q)
    if backward_uses_efficiency:
        dd = dv.assemble(model, q, None, FlowDirection.BWD)
    else:
        dd = dv.conventional(model, q)
    lam_float = _inv(dv.task_inverse_inertia(dd, J), "floating foot inverse inertia")
    b = model.b
    if reference == "joints":
        Jr, Hr = J[:, :b], dd.H[:b, :b]
    elif reference == "base":
        Jr, Hr = J[:, b:], dd.H[b:, b:]
    else:
        raise ModelError(f"unknown IMF reference {reference!r}")
    lam_ref = _inv(Jr @ np.linalg.solve(Hr, Jr.T), "reference foot inverse inertia")
    value = 1.0 - float(n @ lam_float @ n) / float(n @ lam_ref @ n)
    return ImfResult(value, n, reference)


@dataclass(frozen=True)
class SweepRow:
    eta_f: float
    eta_b: float
    fc_fwd_norm: float
    fc_bwd_norm: float
    imf: float

    @property
    def locked(self) -> bool:
        return self.eta_b <= 0


def _sweep_row(args) -> SweepRow:
    model, q, eta_f, direction, reference = args
    t = model.transmissions
    eta_b = float(backward_from_forward(eta_f, t.efficiency_map))
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    ref_fc = force_capability(model, q, variant=Variant.CONVENTIONAL).support(n)
    etas_f = np.full(t.m, eta_f)
    if eta_b <= 0:
        # backdriving is impossible: unbounded resistance, joints act locked
        fwd = model.with_transmissions(t.with_efficiencies(etas_f, np.ones(t.m)))
        fc_f = force_capability(fwd, q, variant=Variant.FORWARD).support(n) / ref_fc
        value = 0.0 if reference == "joints" else 1.0
        return SweepRow(eta_f, eta_b, fc_f, math.inf, value)
    swept = model.with_transmissions(t.with_efficiencies(etas_f, np.full(t.m, eta_b)))
    fc_f = force_capability(swept, q, variant=Variant.FORWARD).support(n) / ref_fc
    fc_b = force_capability(swept, q, variant=Variant.BACKWARD).support(n) / ref_fc
    value = imf(swept, q, n, reference).value if swept.b == 3 else math.nan
    return SweepRow(eta_f, eta_b, fc_f, fc_b, value)


def efficiency_sweep(
    model: rb.RobotModel,
    q=None,
    eta_f_grid: Sequence[float] = (),
    direction=(0.0, 1.0),
    reference: str = "joints",
    workers: int = 1,
) -> List[SweepRow]:
    """Normalized forward/backward force capability and IMF versus ``eta_f``.

    Every joint gets the same forward efficiency; backward efficiencies come
    from the model's efficiency map. Force capabilities are support values
    along ``direction`` divided by the conventional one. IMF is NaN for a
    fixed-base model.
    """
    q = model.default_q() if q is None else np.asarray(q, dtype=float)
    grid = [float(v) for v in eta_f_grid]
    if any(not 0 < v <= 1 for v in grid):
        raise ModelError("sweep efficiencies must lie in (0, 1]")
    diffs = np.diff(grid)
    if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ModelError("sweep grid must be strictly monotone")
    jobs = [(model, q, v, tuple(direction), reference) for v in grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, jobs))
    return [_sweep_row(job) for job in jobs]


def parse_grid(text: str) -> List[float]:
    """``"lo:hi:step"`` (inclusive of ``hi`` within 1e-9) or comma list."""
    text = text.strip()
    if ":" not in text:
        return [float(v) for v in text.split(",") if v.strip()]
    parts = text.split(":")
    if len(parts) != 3:
        raise ModelError(f"grid must look like lo:hi:step, got {text!r}")
    lo, hi, step = (float(p) for p in parts)
    if step == 0 or (hi - lo) * step < 0:
        raise ModelError(f"grid step {step} does not move from {lo} towards {hi}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 12) for k in range(count)]
