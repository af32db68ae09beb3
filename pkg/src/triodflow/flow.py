"""Time integration of the special anisotropic curve shortening flow on a triod.

Each step freezes the coefficients ``c_k = psi(theta_k) / |u_x|_k^2`` at the
old time and treats the second difference implicitly::

    (u'_k - u_k) / dt = c_k N^2 (u'_{k+1} - 2 u'_k + u'_{k-1}),   1 <= k < N,

with ``u'_N = P`` and ``u'_0 = q``.  The interior is affine in the junction
position ``q``, so the Herring condition becomes two equations in two
unknowns which are solved by a damped Newton iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lapack

from .anisotropy import Anisotropy, ellipticity_bounds, phi_theta, psi
from .diagnostics import DiagnosticsRecord, _record_and_frame, aniso_lengths
from .errors import Degenerate, GeometricObstruction, IoError, SolverFailure, ValidationError
from .geometry import TriodNetwork, admissibility_report, frenet
from .reparam import to_constant_speed

__all__ = ["FlowConfig", "FlowState", "StopReason", "cfl_dt", "step", "run"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowConfig:
    N: int = 128
    cfl: float = 0.5
    t_max: float = 1.0
    L_min: float = 1e-3
    K_max: float = 1e6
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    reparam_every: int = 25
    delta_reg: float = 1e-9
    a0_floor: float = 0.05
    admissibility_tol: float = 1e-6
    strict: bool = False

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4:
            raise ValidationError("N", "must be an integer >= 4")
        if not 0.0 < self.cfl <= 1.0:
            raise ValidationError("cfl", "must lie in (0, 1]")
        for name in ("t_max", "L_min", "K_max", "newton_tol", "delta_reg", "a0_floor", "admissibility_tol"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0.0):
                raise ValidationError(name, "must be positive and finite")
        if int(self.newton_max_iter) != self.newton_max_iter or self.newton_max_iter < 1:
            raise ValidationError("newton_max_iter", "must be a positive integer")
        if int(self.reparam_every) != self.reparam_every or self.reparam_every < 0:
            raise ValidationError("reparam_every", "must be a non-negative integer")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class FlowState:
    net: TriodNetwork
    t: float = 0.0
    step_index: int = 0


@dataclass(frozen=True)
class StopReason:
    kind: str
    curve: Optional[int] = None
    detail: Optional[str] = None

    KINDS = ("MaxTimeReached", "LengthVanishing", "CurvatureBlowup", "SolverFailure")

    def __str__(self):
        if self.kind == "LengthVanishing":
            return f"LengthVanishing({self.curve})"
        if self.kind == "SolverFailure":
            return f"SolverFailure({self.detail})"
        return self.kind


def _max_psi(a: Anisotropy) -> float:
    return ellipticity_bounds(a, 3600)[1]


def cfl_dt(s: FlowState, a: Anisotropy, cfl: float, delta_reg: float = 1e-9) -> float:
    """Parabolic mesh step ``cfl * min_k (|u_x|_k / N)^2 / M``."""
    speed = frenet(s.net.nodes, delta_reg).speed
    n = s.net.N
    return float(cfl * (speed.min() / n) ** 2 / _max_psi(a))


def _tridiagonal_solve(r, rhs):
    """Solve the three decoupled systems ``(1 + 2 r_k) v_k - r_k (v_{k-1} + v_{k+1}) = rhs_k``.

    ``r`` has shape ``(3, m)``; ``rhs`` has shape ``(3, m, ncol)``.
    """
    m = r.shape[1]
    diag = (1.0 + 2.0 * r).reshape(-1)
    lower = -r[:, 1:]
    upper = -r[:, :-1]
    sep = np.zeros((3, 1))
    dl = np.concatenate([lower, sep], axis=1).reshape(-1)[:-1]
    du = np.concatenate([upper, sep], axis=1).reshape(-1)[:-1]
    b = rhs.reshape(3 * m, -1)
    _, _, _, x, info = lapack.dgtsv(dl, diag, du, b, overwrite_dl=1, overwrite_d=1, overwrite_du=1)
    if info != 0:
        raise SolverFailure(f"tridiagonal solve failed (info={info})")
    return x.reshape(3, m, -1)


_ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


class _JunctionProblem:
    """Herring residual of the implicit step as a function of the junction position."""

    def __init__(self, w, g, a, n):
        # nodes 1 and 2 of each curve are w + g q, so u_x(0) = c + d q
        self.c = 0.5 * n * (4.0 * w[:, 0] - w[:, 1])
        self.d = 0.5 * n * (4.0 * g[:, 0] - g[:, 1] - 3.0)
        self.a = a

    def residual(self, q):
        """Residual and its Jacobian at the junction position ``q``."""
        normal = (self.c + self.d[:, None] * q) @ _ROT.T
        r = np.hypot(normal[:, 0], normal[:, 1])
        if np.any(r == 0.0):
            raise Degenerate("vanishing junction tangent")
        theta = np.arctan2(normal[:, 1], normal[:, 0])
        phi, dphi, d2phi = phi_theta(self.a, theta)
        c, s = np.cos(theta), np.sin(theta)
        res = np.array([np.sum(phi * c - dphi * s), np.sum(phi * s + dphi * c)])
        # Hessian of the polar norm at v is (phi + phi'') tau tau^T / |v|
        tau = np.stack([s, -c], axis=1)
        weight = (phi + d2phi) * self.d / r
        jac = np.einsum("i,ij,ik->jk", weight, tau, tau) @ _ROT
        return res, jac


def _newton(problem: _JunctionProblem, q0, tol, max_iter):
    q = np.array(q0, dtype=float)
    r, J = problem.residual(q)
    rn = float(np.hypot(*r))
    best = rn
    stalled = 0
    for _ in range(max_iter):
        if rn <= tol:
            return q, rn
        try:
            dq = -np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            raise SolverFailure("singular junction Jacobian")
        if not np.all(np.isfinite(dq)):
            raise SolverFailure("singular junction Jacobian")
        for _ in range(40):
            q_try = q + dq
            try:
                r_try, J_try = problem.residual(q_try)
                rn_try = float(np.hypot(*r_try))
            except Degenerate:
                rn_try = np.inf
            if rn_try < rn:
                break
            dq *= 0.5
        q, r, J, rn = q_try, r_try, J_try, rn_try
        if not np.isfinite(rn):
            raise SolverFailure("junction Newton left the regular region")
        if rn < best:
            best = rn
            stalled = 0
        else:
            stalled += 1
            if stalled >= 5:
                raise SolverFailure(f"junction Newton stalled at residual {rn:.3e}")
    if rn <= tol:
        return q, rn
    raise SolverFailure(f"junction Newton did not converge ({rn:.3e} > {tol:.3e})")


def _resample(net: TriodNetwork) -> TriodNetwork:
    nodes = np.stack([to_constant_speed(net.nodes[i], net.N).nodes for i in range(3)])
    nodes[:, 0] = net.nodes[0, 0]
    nodes[:, -1] = net.endpoints
    return net.with_nodes(nodes)


def _due_for_resample(s: FlowState, cfg: FlowConfig) -> bool:
    return cfg.reparam_every > 0 and s.step_index > 0 and s.step_index % cfg.reparam_every == 0


def _advance(net: TriodNetwork, a: Anisotropy, cfg: FlowConfig, dt: float, fr=None) -> TriodNetwork:
    u = net.nodes
    n = net.N
    if fr is None:
        fr = frenet(u, cfg.delta_reg)
    coef = psi(a, fr.theta) / fr.speed**2
    r = dt * float(n) * n * coef[:, 1:-1]

    P = net.endpoints
    rhs = np.zeros((3, n - 1, 3))
    rhs[:, :, :2] = u[:, 1:-1]
    rhs[:, -1, :2] += r[:, -1, None] * P
    rhs[:, 0, 2] = r[:, 0]
    sol = _tridiagonal_solve(r, rhs)
    w, g = sol[:, :, :2], sol[:, :, 2]

    problem = _JunctionProblem(w[:, :2], g[:, :2], a, n)
    q, _ = _newton(problem, net.junction, cfg.newton_tol, cfg.newton_max_iter)

    new = np.empty_like(u)
    new[:, 1:-1] = w + g[..., None] * q
    new[:, 0] = q
    new[:, -1] = P
    chords = np.diff(new, axis=1)
    if (chords * chords).sum(axis=-1).min() * n * n < cfg.delta_reg**2:
        raise Degenerate("curve lost regularity during the step")
    return net.with_nodes(new)


def step(s: FlowState, a: Anisotropy, cfg: FlowConfig, dt: Optional[float] = None) -> FlowState:
    """Advance one semi-implicit step.

    ``dt`` defaults to :func:`cfl_dt`.  If the step index is a positive
    multiple of ``cfg.reparam_every`` the curves are first resampled at
    constant speed (a pure reparametrization), so the junction closure of
    this step sees the resampled nodes and the returned state satisfies the
    Herring condition to ``cfg.newton_tol``.
    """
    net = _resample(s.net) if _due_for_resample(s, cfg) else s.net
    if dt is None:
        dt = cfl_dt(replace(s, net=net), a, cfg.cfl, cfg.delta_reg)
    new = _advance(net, a, cfg, dt)
    return FlowState(new, s.t + dt, s.step_index + 1)


Sink = Callable[[FlowState, DiagnosticsRecord], None]


def run(net0: TriodNetwork, a: Anisotropy, cfg: FlowConfig, sink: Optional[Sink] = None):
    """Integrate until the time limit or one of the singular alternatives.

    Stops with ``LengthVanishing(i)`` when curve ``i`` (1-based) is no longer
    than ``cfg.L_min``, ``CurvatureBlowup`` when the weighted squared L2 norm
    of the anisotropic curvature reaches ``cfg.K_max``, ``MaxTimeReached`` at
    ``cfg.t_max`` and ``SolverFailure`` if a step cannot be completed.  The
    sink sees every accepted step, in order.

    Returns ``(final_state, stop_reason)``.
    """
    m_max = _max_psi(a)
    report = admissibility_report(net0, a, cfg.admissibility_tol, cfg.a0_floor)
    if not report.passed:
        if cfg.strict:
            raise GeometricObstruction("initial network is not admissible: " + ", ".join(report.failures))
        log.warning("initial network not admissible (%s); continuing", ", ".join(report.failures))

    state = FlowState(net0, 0.0, 0)
    t_eps = 1e-12 * max(1.0, cfg.t_max)
    prev = None
    fr = None
    while True:
        try:
            resampled = _due_for_resample(state, cfg)
            net = _resample(state.net) if resampled else state.net
            if fr is None or resampled:
                fr = frenet(net.nodes, cfg.delta_reg)
            dt = cfg.cfl * (fr.speed.min() / net.N) ** 2 / m_max
            if state.t + dt > cfg.t_max:
                dt = cfg.t_max - state.t
            if resampled or prev is None:
                lphi_start = float(np.sum(aniso_lengths(net, a)))
            else:
                lphi_start = prev.total_lphi
            new = FlowState(_advance(net, a, cfg, dt, fr), state.t + dt, state.step_index + 1)
            record, fr = _record_and_frame(new, a, cfg.a0_floor, dt, lphi_start, resampled, cfg.delta_reg)
        except (SolverFailure, Degenerate) as exc:
            return state, StopReason("SolverFailure", detail=str(exc))
        if new.step_index == 1 and report.herring > cfg.newton_tol:
            record.hc_projected = True
        state, prev = new, record
        if sink is not None:
            try:
                sink(state, record)
            except IoError:
                return state, StopReason("SolverFailure", detail="io")
        short = [i for i in range(3) if record.L[i] <= cfg.L_min]
        if short:
            return state, StopReason("LengthVanishing", curve=short[0] + 1)
        if record.kphi_l2sq >= cfg.K_max:
            return state, StopReason("CurvatureBlowup")
        if state.t >= cfg.t_max - t_eps:
            return state, StopReason("MaxTimeReached")
