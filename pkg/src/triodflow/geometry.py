"""Discrete curves, triods and their Frenet data.

A curve is sampled at ``N + 1`` uniform parameter nodes ``x_k = k / N``.
Derivatives in ``x`` use central differences in the interior and one-sided
second order stencils at both ends.  All array helpers accept extra leading
axes, so a whole triod of shape ``(3, N + 1, 2)`` is processed in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .anisotropy import Anisotropy, phi_theta, polar_eval, polar_grad, psi
from .errors import Degenerate, DegenerateJunction, ValidationError

__all__ = [
    "DiscreteCurve",
    "TriodNetwork",
    "FrenetData",
    "JunctionLambdas",
    "AdmissibilityReport",
    "perp",
    "d_dx",
    "d2_dx2",
    "frenet",
    "curvature",
    "aniso_curvature",
    "junction_frame",
    "junction_lambdas",
    "herring_residual",
    "special_velocity",
    "admissibility_report",
]

DELTA_REG = 1e-12
A0_FLOOR = 0.05


def perp(v):
    """Anti-clockwise rotation by pi/2: ``(a, b) -> (-b, a)``."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def _nodes(c):
    if isinstance(c, TriodNetwork):
        return c.nodes
    return np.asarray(getattr(c, "nodes", c), dtype=float)


def d_dx(u):
    """First parameter derivative of nodal data along axis -2."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-2] - 1
    out = np.empty_like(u)
    out[..., 1:-1, :] = 0.5 * n * (u[..., 2:, :] - u[..., :-2, :])
    out[..., 0, :] = 0.5 * n * (-3.0 * u[..., 0, :] + 4.0 * u[..., 1, :] - u[..., 2, :])
    out[..., -1, :] = 0.5 * n * (3.0 * u[..., -1, :] - 4.0 * u[..., -2, :] + u[..., -3, :])
    return out


def d2_dx2(u):
    """Second parameter derivative along axis -2 (one-sided 4-point stencils at the ends)."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-2] - 1
    n2 = float(n) * n
    out = np.empty_like(u)
    out[..., 1:-1, :] = n2 * (u[..., 2:, :] - 2.0 * u[..., 1:-1, :] + u[..., :-2, :])
    out[..., 0, :] = n2 * (2.0 * u[..., 0, :] - 5.0 * u[..., 1, :] + 4.0 * u[..., 2, :] - u[..., 3, :])
    out[..., -1, :] = n2 * (2.0 * u[..., -1, :] - 5.0 * u[..., -2, :] + 4.0 * u[..., -3, :] - u[..., -4, :])
    return out


def _d_dx_scalar(f):
    return d_dx(np.asarray(f)[..., None])[..., 0]


@dataclass(frozen=True)
class DiscreteCurve:
    """Polyline sampling of a regular curve ``u: [0, 1] -> R^2``."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValidationError("nodes", "expected an array of shape (N + 1, 2)")
        if nodes.shape[0] < 5:
            raise ValidationError("nodes", "at least N = 4 intervals are required")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def N(self) -> int:
        return self.nodes.shape[0] - 1

    @classmethod
    def segment(cls, p, q, N: int) -> "DiscreteCurve":
        p, q = np.asarray(p, float), np.asarray(q, float)
        x = np.arange(N + 1)[:, None] / N
        nodes = p + x * (q - p)
        nodes[-1] = q
        return cls(nodes)


@dataclass(frozen=True)
class TriodNetwork:
    """Three curves sharing the junction node (parameter 0) with fixed ends at parameter 1.

    ``nodes`` has shape ``(3, N + 1, 2)``; ``nodes[i, 0]`` is the junction and
    ``nodes[i, N]`` is the endpoint ``P^(i+1)``.
    """

    nodes: np.ndarray
    endpoints: np.ndarray = field(default=None)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 3 or nodes.shape[0] != 3 or nodes.shape[2] != 2:
            raise ValidationError("nodes", "expected an array of shape (3, N + 1, 2)")
        if nodes.shape[1] < 5:
            raise ValidationError("nodes", "at least N = 4 intervals are required")
        if self.endpoints is None:
            endpoints = nodes[:, -1].copy()
        else:
            endpoints = np.array(self.endpoints, dtype=float).reshape(3, 2)
        if not (np.array_equal(nodes[0, 0], nodes[1, 0]) and np.array_equal(nodes[0, 0], nodes[2, 0])):
            raise ValidationError("nodes", "curves must share the junction node exactly")
        if not np.array_equal(nodes[:, -1], endpoints):
            raise ValidationError("endpoints", "curve ends must coincide with the endpoints")
        nodes.setflags(write=False)
        endpoints.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "endpoints", endpoints)

    @property
    def N(self) -> int:
        return self.nodes.shape[1] - 1

    @property
    def junction(self) -> np.ndarray:
        return self.nodes[0, 0]

    @property
    def curves(self):
        return tuple(DiscreteCurve(self.nodes[i]) for i in range(3))

    @property
    def diameter(self) -> float:
        pts = self.nodes.reshape(-1, 2)
        return float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))

    @classmethod
    def straight(cls, junction, endpoints, N: int) -> "TriodNetwork":
        """Three uniformly sampled segments from ``junction`` to each endpoint."""
        q = np.asarray(junction, dtype=float)
        P = np.asarray(endpoints, dtype=float).reshape(3, 2)
        x = np.arange(N + 1)[None, :, None] / N
        nodes = q + x * (P[:, None, :] - q)
        nodes[:, 0] = q
        nodes[:, -1] = P
        return cls(nodes, P)

    @classmethod
    def from_curves(cls, curves) -> "TriodNetwork":
        """Stack three node arrays of equal length; the first node of curve 1 is
        copied to the other two so that concurrency holds bitwise."""
        arrs = [_nodes(c) for c in curves]
        if len(arrs) != 3 or len({a.shape for a in arrs}) != 1:
            raise ValidationError("curves", "need three curves with the same number of nodes")
        nodes = np.stack(arrs).copy()
        if not (np.allclose(nodes[:, 0], nodes[0, 0], rtol=0.0, atol=1e-12 * max(1.0, np.abs(nodes).max()))):
            raise ValidationError("curves", "curves do not meet at a common junction")
        nodes[:, 0] = nodes[0, 0]
        return cls(nodes)

    def with_nodes(self, nodes) -> "TriodNetwork":
        return TriodNetwork(nodes, self.endpoints)


class FrenetData(NamedTuple):
    tau: np.ndarray
    nu: np.ndarray
    theta: np.ndarray
    speed: np.ndarray
    kappa: Optional[np.ndarray] = None
    kappa_phi: Optional[np.ndarray] = None


def _regular_speed(ux, delta_reg):
    speed = np.hypot(ux[..., 0], ux[..., 1])
    if not np.all(speed >= delta_reg):
        k = np.unravel_index(np.argmin(speed), speed.shape)
        raise Degenerate(f"|u_x| = {speed[k]:.3e} below regularity floor {delta_reg:.3e} at node {k}")
    return speed


def frenet(c, delta_reg: float = DELTA_REG) -> FrenetData:
    """Unit tangent, unit normal, normal angle and speed ``|u_x|`` at every node."""
    u = _nodes(c)
    ux = d_dx(u)
    speed = _regular_speed(ux, delta_reg)
    tau = ux / speed[..., None]
    nu = perp(tau)
    theta = np.arctan2(nu[..., 1], nu[..., 0])
    return FrenetData(tau, nu, theta, speed)


def curvature(c, delta_reg: float = DELTA_REG):
    """Signed Euclidean curvature ``kappa = (u_xx . nu) / |u_x|^2``."""
    u = _nodes(c)
    fr = frenet(u, delta_reg)
    uxx = d2_dx2(u)
    return np.einsum("...i,...i->...", uxx, fr.nu) / fr.speed**2


def _kappa_phi(a, theta, kappa):
    phi, _, d2phi = phi_theta(a, theta)
    return (phi + d2phi) * kappa


def aniso_curvature(c, a: Anisotropy, delta_reg: float = DELTA_REG):
    """Anisotropic curvature ``kappa_phi = psi(theta) kappa / phi°(nu)``."""
    u = _nodes(c)
    fr = frenet(u, delta_reg)
    kappa = np.einsum("...i,...i->...", d2_dx2(u), fr.nu) / fr.speed**2
    return _kappa_phi(a, fr.theta, kappa)


def full_frenet(c, a: Anisotropy, delta_reg: float = DELTA_REG) -> FrenetData:
    """Frenet data including both curvatures."""
    u = _nodes(c)
    fr = frenet(u, delta_reg)
    kappa = np.einsum("...i,...i->...", d2_dx2(u), fr.nu) / fr.speed**2
    return fr._replace(kappa=kappa, kappa_phi=_kappa_phi(a, fr.theta, kappa))


def junction_frame(net: TriodNetwork, a: Anisotropy, delta_reg: float = DELTA_REG) -> FrenetData:
    """Frenet data of the three curves at the junction node, each field of leading size 3."""
    u = net.nodes[:, :4]
    n = net.N
    ux = 0.5 * n * (-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2])
    uxx = float(n) * n * (2.0 * u[:, 0] - 5.0 * u[:, 1] + 4.0 * u[:, 2] - u[:, 3])
    speed = _regular_speed(ux, delta_reg)
    tau = ux / speed[:, None]
    nu = perp(tau)
    theta = np.arctan2(nu[:, 1], nu[:, 0])
    kappa = np.einsum("ij,ij->i", uxx, nu) / speed**2
    return FrenetData(tau, nu, theta, speed, kappa, _kappa_phi(a, theta, kappa))


class JunctionLambdas(NamedTuple):
    lam: np.ndarray
    mismatch: float
    lam_plus: np.ndarray
    lam_minus: np.ndarray


def junction_lambdas(net: TriodNetwork, a: Anisotropy, a0_floor: float = A0_FLOOR,
                     delta_reg: float = DELTA_REG) -> JunctionLambdas:
    """Tangential junction velocities from the two neighbour formulas.

    For curve ``i`` (indices mod 3) the neighbour ``i + 1`` gives
    ``lam_plus = (alpha/beta) psi_i k_i - psi_{i+1} k_{i+1} / beta`` and the
    neighbour ``i - 1`` gives the analogous ``lam_minus``.  They agree only on
    velocity-matched data, so the average is returned together with the
    largest disagreement.
    """
    return lambdas_from_frame(junction_frame(net, a, delta_reg), a, a0_floor)


_NEXT = np.array([1, 2, 0])
_PREV = np.array([2, 0, 1])


def lambdas_from_frame(fr: FrenetData, a: Anisotropy, a0_floor: float = A0_FLOOR) -> JunctionLambdas:
    pk = psi(a, fr.theta) * fr.kappa
    nu, tau = fr.nu, fr.tau
    alpha = (nu[_NEXT] * nu).sum(axis=1)
    beta = (tau[_NEXT] * nu).sum(axis=1)
    gamma = (nu[_PREV] * nu).sum(axis=1)
    delta = (tau[_PREV] * nu).sum(axis=1)
    small = min(np.abs(beta).min(), np.abs(delta).min())
    if small < a0_floor:
        raise DegenerateJunction(f"|nu^i . tau^j| = {small:.3e} below a0 floor {a0_floor}")
    lam_plus = (alpha * pk - pk[_NEXT]) / beta
    lam_minus = (gamma * pk - pk[_PREV]) / delta
    lam = 0.5 * (lam_plus + lam_minus)
    return JunctionLambdas(lam, float(np.abs(lam_plus - lam_minus).max()), lam_plus, lam_minus)


def a0_from_frame(fr: FrenetData) -> float:
    g = np.abs(fr.nu @ fr.tau.T)
    return float(min(g[0, 1], g[0, 2], g[1, 0], g[1, 2], g[2, 0], g[2, 1]))


def junction_a0(net: TriodNetwork, delta_reg: float = DELTA_REG) -> float:
    """``min_{i != j} |nu^i . tau^j|`` at the junction."""
    u = net.nodes[:, :3]
    ux = 0.5 * net.N * (-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2])
    tau = ux / _regular_speed(ux, delta_reg)[:, None]
    return a0_from_frame(FrenetData(tau, perp(tau), None, None))


def herring_residual(net: TriodNetwork, a: Anisotropy, delta_reg: float = DELTA_REG):
    """``sum_i D phi°(nu^i)`` at the junction, using one-sided tangents."""
    u = net.nodes[:, :3]
    ux = 0.5 * net.N * (-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2])
    _regular_speed(ux, delta_reg)
    return polar_grad(a, perp(ux)).sum(axis=0)


def special_velocity(net: TriodNetwork, a: Anisotropy, node: int = 0, delta_reg: float = DELTA_REG):
    """Discrete special-flow velocity ``psi(theta) u_xx / |u_x|^2`` of each curve at ``node``."""
    u = net.nodes
    ux = d_dx(u)[:, node]
    uxx = d2_dx2(u)[:, node]
    speed = _regular_speed(ux, delta_reg)
    nu = perp(ux / speed[:, None])
    theta = np.arctan2(nu[:, 1], nu[:, 0])
    return psi(a, theta)[:, None] * uxx / speed[:, None] ** 2


def _pairwise_max(v):
    return float(max(np.hypot(*(v[i] - v[j])) for i in range(3) for j in range(i + 1, 3)))


@dataclass
class AdmissibilityReport:
    """Named residuals of the geometric admissibility conditions."""

    tol: float
    concurrency: float
    herring: float
    endpoint_kphi: np.ndarray
    velocity_mismatch: float
    lambda_mismatch: float
    a0_min: float

    @property
    def checks(self) -> dict:
        return {
            "concurrency": self.concurrency <= self.tol,
            "herring": self.herring <= self.tol,
            "endpoint_kphi_1": self.endpoint_kphi[0] <= self.tol,
            "endpoint_kphi_2": self.endpoint_kphi[1] <= self.tol,
            "endpoint_kphi_3": self.endpoint_kphi[2] <= self.tol,
            "velocity_mismatch": self.velocity_mismatch <= self.tol,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failures(self):
        return [name for name, ok in self.checks.items() if not ok]

    def __str__(self):
        lines = [f"admissibility (tol={self.tol:.3g}): {'PASS' if self.passed else 'FAIL'}"]
        lines.append(f"  concurrency        {self.concurrency:.3e}")
        lines.append(f"  |herring residual| {self.herring:.3e}")
        for i, v in enumerate(self.endpoint_kphi):
            lines.append(f"  |kappa_phi^{i + 1}(1)|    {v:.3e}")
        lines.append(f"  velocity mismatch  {self.velocity_mismatch:.3e}")
        lines.append(f"  lambda mismatch    {self.lambda_mismatch:.3e}")
        lines.append(f"  a0 at junction     {self.a0_min:.3e}")
        return "\n".join(lines)


def admissibility_report(net: TriodNetwork, a: Anisotropy, tol: float = 1e-6,
                         a0_floor: float = A0_FLOOR, delta_reg: float = DELTA_REG) -> AdmissibilityReport:
    """Residuals of concurrency, the Herring condition, endpoint anisotropic
    curvature and junction velocity matching.  Always returns a report."""
    nodes = net.nodes
    concurrency = float(np.abs(nodes[:, 0] - nodes[0, 0]).max())
    herring = float(np.hypot(*herring_residual(net, a, delta_reg)))
    kphi_end = np.abs(aniso_curvature(nodes, a, delta_reg)[:, -1])
    a0 = junction_a0(net, delta_reg)
    try:
        jl = junction_lambdas(net, a, a0_floor, delta_reg)
        fr = junction_frame(net, a, delta_reg)
        vel = (psi(a, fr.theta) * fr.kappa)[:, None] * fr.nu + jl.lam[:, None] * fr.tau
        vmis, lmis = _pairwise_max(vel), jl.mismatch
    except DegenerateJunction:
        vmis = lmis = float("inf")
    return AdmissibilityReport(tol, concurrency, herring, kphi_end, vmis, lmis, a0)
