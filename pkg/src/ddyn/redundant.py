"""Brute-force simulation of the redundant system with explicit multipliers.

Coordinates ``s = (q_b, q_m, phi)`` are integrated without elimination.
Every evaluation solves

    H_s s'' + c_s - A^T lam = tau_s + tau_d,     A s'' = 0

for ``(s'', lam)``. The transmission loss on rotor ``i`` is a Coulomb-type
torque proportional to the torque ``w = (D R)^T lam`` transmitted through
the mesh::

    tau_d[i] = (1 - 1/eta_i) * |tanh(phid_i / eps)| * w_i

with ``eta_i = eta_f`` when the rotor feeds power into the mesh
(``w_i phid_i > 0``) and ``1/eta_b`` when the mesh backdrives the rotor.
In steady sliding the ratio of delivered to supplied mesh power is then
exactly ``eta_f`` (forward) or ``eta_b`` (backward), and the loss always
opposes the rotor's motion.
"""

from dataclasses import dataclass
from itertools import product
from typing import Callable, Optional, Union

import numpy as np

from . import rigid_body as rb
from .errors import ModelError, NumericError
from .flow import FlowDirection
from .transmission import constraint_matrices

Input = Union[None, float, np.ndarray, Callable[[float], np.ndarray]]

CONSTRAINT_TOL = 1e-8


def _as_function(value: Input, size: int) -> Callable[[float], np.ndarray]:
    if callable(value):
        return lambda t: np.asarray(value(t), dtype=float).reshape(size)
    arr = np.zeros(size) if value is None else np.broadcast_to(np.asarray(value, dtype=float), (size,)).copy()
    return lambda t: arr


@dataclass
class RedundantTrajectory:
    """Samples at ``t[k]``; per-sample solves use the state of that sample."""

    t: np.ndarray
    s: np.ndarray
    sd: np.ndarray
    sdd: np.ndarray
    lam: np.ndarray
    tau_d: np.ndarray
    forward: np.ndarray  # bool (n, m): True where the coupling is forward-driven
    eta: np.ndarray  # effective efficiency actually applied, incl. smoothing
    rotor_power: np.ndarray  # power the rotor feeds into each mesh
    joint_power: np.ndarray  # power each mesh delivers to the joint side
    dissipated_power: np.ndarray
    dissipated_energy: np.ndarray
    energy: np.ndarray  # kinetic + potential
    input_power: np.ndarray  # sd . tau_s
    power_residual: np.ndarray  # relative, per sample
    constraint_residual: np.ndarray
    tau_s: np.ndarray
    b: int
    m: int

    def state(self, k: int) -> rb.SystemState:
        n = self.b + self.m
        return rb.SystemState(self.s[k, :n], self.sd[k, :n], self.s[k, n:], self.sd[k, n:])

    def directions(self, k: int):
        return tuple(FlowDirection.FWD if f else FlowDirection.BWD for f in self.forward[k])

    def monotone_mask(self, min_rate: float = 1e-3) -> np.ndarray:
        """Samples where every rotor slides (``|phid| >= min_rate``) and no
        coupling has changed flow direction since the first such sample."""
        n = self.b + self.m
        sliding = np.all(np.abs(self.sd[:, n:]) >= min_rate, axis=1)
        mask = np.zeros(len(self.t), dtype=bool)
        idx = np.flatnonzero(sliding)
        if idx.size == 0:
            return mask
        first = idx[0]
        ref_flow = self.forward[first]
        ref_sign = np.sign(self.sd[first, n:])
        for k in range(first, len(self.t)):
            if not sliding[k] or np.any(self.forward[k] != ref_flow) or np.any(np.sign(self.sd[k, n:]) != ref_sign):
                break
            mask[k] = True
        return mask


class _Evaluator:
    def __init__(self, model: rb.RobotModel, tau_phi, f_ext, smoothing, mode):
        self.model = model
        t = model.transmissions
        self.b, self.m = model.b, t.m
        self.n = model.n_reduced
        self.ns = model.n_redundant
        self.A, _, _ = constraint_matrices(self.b, t)
        self.DR = t.DR
        self.loss_fwd = 1.0 - 1.0 / t.eta_f
        self.loss_bwd = 1.0 - t.eta_b
        self.tau_phi = _as_function(tau_phi, self.m)
        self.f_ext = _as_function(f_ext, 2)
        self.eps = smoothing
        self.forward = np.full(self.m, FlowDirection.parse(mode) is FlowDirection.FWD)
        ns, m = self.ns, self.m
        self.kkt = np.zeros((ns + m, ns + m))
        self.kkt[ns:, :ns] = self.A
        self.rhs = np.zeros(ns + m)

    def forces(self, t, q):
        model = self.model
        tau_s = np.zeros(self.ns)
        f = self.f_ext(t)
        if np.any(f):
            tau_s[: self.n] = rb.contact_jacobian(model, q).T @ f
        tau_s[self.n :] = self.tau_phi(t)
        return tau_s

    def _solve(self, H_s, rhs_top, forward, slide):
        ns, n = self.ns, self.n
        beta = np.where(forward, self.loss_fwd, self.loss_bwd) * slide
        self.kkt[:ns, :ns] = H_s
        # -A^T lam - P diag(beta) (DR)^T lam
        self.kkt[:ns, ns:] = -self.A.T
        self.kkt[n:ns, ns:] -= beta[:, None] * self.DR.T
        self.rhs[:ns] = rhs_top
        self.rhs[ns:] = 0.0
        try:
            sol = np.linalg.solve(self.kkt, self.rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericError("singular constrained dynamics solve") from exc
        lam = sol[ns:]
        return sol[:ns], lam, beta

    def __call__(self, t, s, sd):
        q, qd = s[: self.n], sd[: self.n]
        phid = sd[self.n :]
        H_s, c_s = rb.redundant_terms(self.model, q, qd)
        tau_s = self.forces(t, q)
        slide = np.abs(np.tanh(phid / self.eps))
        rhs_top = tau_s - c_s

        def consistent(forward):
            sdd, lam, beta = self._solve(H_s, rhs_top, forward, slide)
            w = self.DR.T @ lam
            power = w * phid
            # couplings with no friction or no mesh power accept either direction
            ok = ((power > 0) == forward) | (np.abs(power) <= 1e-14) | (slide == 0)
            return bool(np.all(ok)), sdd, lam, beta, w

        guess = self.forward.copy()
        result = None
        for _ in range(3):
            ok, sdd, lam, beta, w = consistent(guess)
            if ok:
                result = (guess, sdd, lam, beta, w)
                break
            guess = (w * phid) > 0
        if result is None:
            for combo in product((True, False), repeat=self.m):
                forward = np.array(combo)
                ok, sdd, lam, beta, w = consistent(forward)
                if ok:
                    result = (forward, sdd, lam, beta, w)
                    break
        if result is None:
            # no self-consistent assignment (stick-slip edge); keep the last solve
            result = (guess, sdd, lam, beta, w)
        forward, sdd, lam, beta, w = result
        self.forward = forward
        tau_d = beta * w
        return sdd, lam, tau_d, forward, beta, tau_s, H_s


def _energy(model, s, sd, H_s):
    n = model.n_reduced
    return 0.5 * float(sd @ H_s @ sd) + rb.potential_energy(model, s[:n])


def _power_balance(model, s, sd, sdd, H_s, tau_s, p_diss, h=1e-6):
    """Relative residual of d(T+V)/dt = sd.tau_s - P_diss.

    The energy rate is evaluated with finite-difference derivatives of the
    mass matrix and potential along ``sd``.
    """
    n = model.n_reduced
    q, qd = s[:n], sd[:n]
    Hp = rb.mass_matrix_redundant(model, q + h * qd)
    Hm = rb.mass_matrix_redundant(model, q - h * qd)
    dH = (Hp - Hm) / (2 * h)
    dV = (rb.potential_energy(model, q + h * qd) - rb.potential_energy(model, q - h * qd)) / (2 * h)
    kinetic_rate = float(sd @ H_s @ sdd) + 0.5 * float(sd @ dH @ sd)
    lhs = kinetic_rate + dV
    rhs = float(sd @ tau_s) - p_diss
    scale = max(abs(kinetic_rate), abs(dV), abs(float(sd @ tau_s)), abs(p_diss), 1e-12)
    return abs(lhs - rhs) / scale


def simulate_redundant_system(
    model: rb.RobotModel,
    state: rb.SystemState,
    tau_phi: Input = None,
    f_ext: Input = None,
    dt: float = 1e-4,
    steps: int = 1000,
    smoothing: float = 1e-5,
    mode="fwd",
    check_power: bool = True,
) -> RedundantTrajectory:
    """Integrate the redundant system with classical RK4.

    ``tau_phi`` (rotor torques, length m) and ``f_ext`` (foot force, x-z)
    are constants or functions of time. ``mode`` seeds the flow-direction
    guess at the first step. Raises :class:`NumericError` if the
    transmission constraint drifts beyond 1e-8.
    """
    if not dt > 0:
        raise ModelError(f"dt must be positive, got {dt}")
    if steps < 1:
        raise ModelError(f"steps must be >= 1, got {steps}")
    if not smoothing > 0:
        raise ModelError(f"smoothing width must be positive, got {smoothing}")
    if state.constraint_residual(model) > 1e-9:
        raise ModelError("initial state violates the transmission constraint")
    ev = _Evaluator(model, tau_phi, f_ext, smoothing, mode)
    ns, m, n = model.n_redundant, model.m, model.n_reduced
    N = steps + 1
    rec = {
        "s": np.zeros((N, ns)), "sd": np.zeros((N, ns)), "sdd": np.zeros((N, ns)),
        "lam": np.zeros((N, m)), "tau_d": np.zeros((N, m)), "fwd": np.zeros((N, m), dtype=bool),
        "eta": np.zeros((N, m)), "p_rot": np.zeros((N, m)), "p_joint": np.zeros((N, m)),
        "p_diss": np.zeros(N), "e_diss": np.zeros(N), "energy": np.zeros(N), "p_in": np.zeros(N),
        "res": np.zeros(N), "cres": np.zeros(N), "tau_s": np.zeros((N, ns)),
    }
    s = np.asarray(state.s, dtype=float).copy()
    sd = np.asarray(state.sd, dtype=float).copy()
    e_diss = 0.0
    A = ev.A

    def deriv(t, s_, sd_):
        sdd, _, tau_d, _, _, _, _ = ev(t, s_, sd_)
        return sdd, -float(tau_d @ sd_[n:])

    for k in range(N):
        t = k * dt
        sdd, lam, tau_d, forward, beta, tau_s, H_s = ev(t, s, sd)
        phid = sd[n:]
        w = ev.DR.T @ lam
        p_diss = -float(tau_d @ phid)
        rec["s"][k], rec["sd"][k], rec["sdd"][k] = s, sd, sdd
        rec["lam"][k], rec["tau_d"][k], rec["fwd"][k] = lam, tau_d, forward
        rec["eta"][k] = 1.0 / (1.0 - beta)
        rec["p_rot"][k] = (w - tau_d) * phid
        rec["p_joint"][k] = w * phid
        rec["p_diss"][k], rec["e_diss"][k] = p_diss, e_diss
        rec["energy"][k] = _energy(model, s, sd, H_s)
        rec["p_in"][k] = float(sd @ tau_s)
        rec["tau_s"][k] = tau_s
        if check_power:
            rec["res"][k] = _power_balance(model, s, sd, sdd, H_s, tau_s, p_diss)
        cres = float(np.max(np.abs(A @ s))) if m else 0.0
        rec["cres"][k] = cres
        if cres > CONSTRAINT_TOL:
            raise NumericError(f"constraint residual {cres:.3g} exceeds {CONSTRAINT_TOL} at step {k}; reduce dt")
        if k == steps:
            break
        # RK4 on (s, sd, dissipated energy); the first stage reuses this solve
        saved = ev.forward.copy()
        a1, p1 = sdd, p_diss
        v1 = sd
        v2 = sd + 0.5 * dt * a1
        a2, p2 = deriv(t + 0.5 * dt, s + 0.5 * dt * v1, v2)
        v3 = sd + 0.5 * dt * a2
        a3, p3 = deriv(t + 0.5 * dt, s + 0.5 * dt * v2, v3)
        v4 = sd + dt * a3
        a4, p4 = deriv(t + dt, s + dt * v3, v4)
        s = s + dt / 6.0 * (v1 + 2 * v2 + 2 * v3 + v4)
        sd = sd + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        e_diss += dt / 6.0 * (p1 + 2 * p2 + 2 * p3 + p4)
        ev.forward = saved
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(sd))):
            raise NumericError(f"simulation diverged at step {k}")

    return RedundantTrajectory(
        np.arange(N) * dt, rec["s"], rec["sd"], rec["sdd"], rec["lam"], rec["tau_d"], rec["fwd"],
        rec["eta"], rec["p_rot"], rec["p_joint"], rec["p_diss"], rec["e_diss"], rec["energy"],
        rec["p_in"], rec["res"], rec["cres"], rec["tau_s"], model.b, m,
    )
