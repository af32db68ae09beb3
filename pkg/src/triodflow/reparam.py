"""Reparametrizations that leave the curve image unchanged.

Curves are resampled along a cubic spline through their nodes, parametrized
by cumulative chord length.  A piecewise-linear interpolant would put new
nodes on the chords and corrupt discrete second differences by O(1) near the
old nodes, which matters because the flow reads curvature from them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .anisotropy import Anisotropy, psi
from .errors import Degenerate, GeometricObstruction, SpecViolation, ValidationError
from .geometry import (
    A0_FLOOR,
    DiscreteCurve,
    TriodNetwork,
    _nodes,
    admissibility_report,
    herring_residual,
    junction_frame,
    junction_lambdas,
    special_velocity,
)

__all__ = [
    "ReparamSpec",
    "CompatibilityReport",
    "to_constant_speed",
    "lempara_reparam",
    "bump_profile",
    "make_compatible",
]


def _spline(u):
    chords = np.hypot(*np.diff(u, axis=0).T)
    if np.any(chords <= 0.0):
        raise Degenerate("curve has coincident consecutive nodes")
    s = np.concatenate([[0.0], np.cumsum(chords)])
    return CubicSpline(s, u, axis=0), s[-1]


def _equal_chord_params(spline, total, n, tol=1e-14, max_iter=60):
    s = total * np.arange(n + 1) / n
    target = np.arange(n + 1) / n
    best = np.inf
    for _ in range(max_iter):
        p = spline(s)
        chords = np.hypot(*np.diff(p, axis=0).T)
        mean = chords.mean()
        err = np.abs(chords - mean).max() / mean
        # quadratic convergence down to roundoff; stop once it stalls there
        if err <= tol or err >= 0.5 * best:
            break
        best = err
        cum = np.concatenate([[0.0], np.cumsum(chords)])
        s = np.interp(cum[-1] * target, cum, s)
        s[0], s[-1] = 0.0, total
    return s


def to_constant_speed(c, N_out: int | None = None) -> DiscreteCurve:
    """Resample so that consecutive nodes are equidistant along the curve.

    Nodes are placed on the interpolating spline with equal chord lengths, so
    the discrete speed is constant and the map is idempotent.  End nodes are
    copied exactly.
    """
    u = _nodes(c)
    n = u.shape[0] - 1 if N_out is None else int(N_out)
    if n < 4:
        raise ValidationError("N_out", "at least 4 intervals are required")
    spline, total = _spline(u)
    s = _equal_chord_params(spline, total, n)
    out = spline(s)
    out[0], out[-1] = u[0], u[-1]
    return DiscreteCurve(out)


def bump_profile(y):
    """Profile ``p(y) = y^2 (1 - y)^5 (2 + 10 y + 27 y^2) / 4`` and its first two
    derivatives on [0, 1].

    ``p(0) = p'(0) = 0``, ``p''(0) = 1`` and ``p'''(0) = 0``: the second
    derivative is flat at the origin, so one-sided stencils resolve it.  All
    derivatives up to order four vanish at ``y = 1``, ``|p''| <= 1`` and
    ``|p'| < 0.131``.  Zero outside [0, 1].
    """
    y = np.asarray(y, dtype=float)
    inside = (y >= 0.0) & (y <= 1.0)
    yc = np.clip(y, 0.0, 1.0)
    w = 1.0 - yc
    p = 0.25 * yc**2 * w**5 * (2.0 + yc * (10.0 + 27.0 * yc))
    dp = 0.25 * yc * w**4 * (4.0 + yc * (16.0 + yc * (28.0 - 243.0 * yc)))
    d2p = w**3 * (1.0 + yc * (3.0 + yc * (-3.0 + yc * (-292.0 + 486.0 * yc))))
    return np.where(inside, p, 0.0), np.where(inside, dp, 0.0), np.where(inside, d2p, 0.0)


@dataclass(frozen=True)
class ReparamSpec:
    """Target ``mu`` of ``phi''(0)/phi'(0)^2`` (1/length), bump width ``delta``
    (length) and output node count ``N``."""

    mu: float
    delta: float
    N: int

    def __post_init__(self):
        if self.N < 4:
            raise SpecViolation("N must be at least 4")
        if not self.delta > 0.0:
            raise SpecViolation("delta must be positive")

    def check(self, length: float):
        bound = 0.5 * length
        if self.mu != 0.0:
            bound = min(bound, 1.0 / (2.0 * abs(self.mu)))
        if self.delta > bound * (1.0 + 1e-12):
            raise SpecViolation(f"delta = {self.delta:.6g} exceeds its bound {bound:.6g}")


def _lempara_map(s, spec):
    """``phi(s) = s + h(s)`` with ``h = mu delta^2 p(s/delta)``; returns phi and phi'."""
    p, dp, _ = bump_profile(s / spec.delta)
    return s + spec.mu * spec.delta**2 * p, 1.0 + spec.mu * spec.delta * dp


def lempara_reparam(c, spec: ReparamSpec, end: int = 0) -> DiscreteCurve:
    """Reparametrize a constant-speed curve so that ``phi''(0)/phi'(0)^2 = mu``
    at the chosen end while the image and both end nodes stay fixed.

    The diffeomorphism is ``phi(s) = s + h(s)`` in arc length, where
    ``h'' = f = mu p''(s/delta)`` is supported in ``[0, delta]`` and ``h``, ``h'``
    vanish at both ends of the support, so ``phi`` fixes 0 and ``L`` and
    ``phi' >= 1/2``.  ``end=1`` applies the construction at parameter 1 (the
    sign of ``mu`` refers to the orientation running inward from that end).
    """
    u = _nodes(c)
    if end == 1:
        return DiscreteCurve(lempara_reparam(u[::-1], spec, 0).nodes[::-1])
    # equal chords are the discrete notion of constant speed
    chords = np.hypot(*np.diff(u, axis=0).T)
    if np.ptp(chords) > 1e-6 * chords.mean():
        raise SpecViolation("input curve is not constant speed")
    spline, total = _spline(u)
    spec.check(total)
    if spec.mu == 0.0 and spec.N == u.shape[0] - 1:
        return DiscreteCurve(u.copy())
    s = total * np.arange(spec.N + 1) / spec.N
    phi, dphi = _lempara_map(s, spec)
    if dphi.min() < 0.5 or np.any(np.diff(phi) <= 0.0):
        raise SpecViolation("reparametrization is not a diffeomorphism")
    out = spline(phi)
    out[0], out[-1] = u[0], u[-1]
    return DiscreteCurve(out)


@dataclass
class CompatibilityReport:
    """Residuals of the junction and endpoint compatibility conditions.

    ``velocity_mismatch_*`` is the largest pairwise difference of the discrete
    special-flow velocities ``psi u_xx/|u_x|^2`` at the junction;
    ``endpoint_accel`` is ``|u_xx|/|u_x|^2`` at parameter 1 for each curve.
    """

    velocity_mismatch_before: float
    velocity_mismatch_after: float
    endpoint_accel: np.ndarray
    herring: float
    mu: np.ndarray

    def max_residual(self) -> float:
        return float(max(self.velocity_mismatch_after, self.endpoint_accel.max(), self.herring))


def _velocity_mismatch(v):
    return float(max(np.hypot(*(v[i] - v[j])) for i in range(3) for j in range(i + 1, 3)))


def _reparam_curve(u, mu, delta):
    if mu == 0.0:
        return u
    return lempara_reparam(u, ReparamSpec(mu, delta, u.shape[0] - 1)).nodes


def make_compatible(net: TriodNetwork, a: Anisotropy, tol: float = 1e-6,
                    a0_floor: float = A0_FLOOR, rounds: int = 4):
    """Reparametrize a geometrically admissible triod so the discrete special
    flow is compatible with its boundary conditions.

    Each curve is resampled at constant speed, which removes the tangential
    part of ``u_xx`` at the fixed ends.  Near the junction a bump
    reparametrization sets the tangential velocity ``psi (u_xx . tau)/|u_x|^2``
    to the value required for the three special-flow velocities to coincide;
    the initial targets come from :func:`junction_lambdas` and are then
    corrected by a secant iteration on the discrete stencil.

    Raises :class:`GeometricObstruction` if the Herring condition or the
    vanishing of the endpoint anisotropic curvature fails beyond ``tol``.
    """
    rep = admissibility_report(net, a, tol, a0_floor)
    if rep.herring > tol:
        raise GeometricObstruction(f"Herring residual {rep.herring:.3e} exceeds {tol:.3e}")
    if rep.endpoint_kphi.max() > tol:
        raise GeometricObstruction(f"endpoint anisotropic curvature {rep.endpoint_kphi.max():.3e} exceeds {tol:.3e}")

    before = _velocity_mismatch(special_velocity(net, a))
    n = net.N
    cs = np.stack([to_constant_speed(net.nodes[i], n).nodes for i in range(3)])
    cs[:, 0] = cs[0, 0]
    base = net.with_nodes(cs)
    lengths = np.hypot(*np.diff(cs, axis=1).transpose(2, 0, 1)).sum(axis=1)

    fr = junction_frame(base, a)
    psi0 = psi(a, fr.theta)
    mu = junction_lambdas(base, a, a0_floor).lam / psi0

    def width(i, m):
        # keeps |mu| delta <= 1/3, inside the admissible range with margin
        return 0.5 * lengths[i] if m == 0.0 else min(0.5 * lengths[i], 1.0 / (3.0 * abs(m)))

    def curve(i, m):
        return _reparam_curve(cs[i], m, width(i, m))

    def tangential(i, m):
        trial = cs.copy()
        trial[i] = curve(i, m)
        v = special_velocity(TriodNetwork(trial, net.endpoints), a)[i]
        return float(v @ fr.tau[i])

    def solve_mu(i, m0, target):
        # secant on the discrete stencil; the tangential velocity is about psi * mu
        g0 = tangential(i, m0) - target
        m1 = m0 - g0 / psi0[i]
        for _ in range(40):
            if abs(g0) <= 1e-13 * max(1.0, abs(target)) or m1 == m0:
                break
            g1 = tangential(i, m1) - target
            if g1 == g0:
                break
            m0, g0, m1 = m1, g1, m1 - g1 * (m1 - m0) / (g1 - g0)
        return m0

    def assemble():
        out = np.stack([curve(i, mu[i]) for i in range(3)])
        out[:, 0] = cs[0, 0]
        return TriodNetwork(out, net.endpoints)

    result = assemble()
    for _ in range(rounds):
        v = special_velocity(result, a)
        normal = np.einsum("ij,ij->i", v, fr.nu)[:, None] * fr.nu
        # least squares for a common velocity W = normal_i + t_i tau_i
        lhs = np.zeros((6, 5))
        for i in range(3):
            lhs[2 * i:2 * i + 2, :2] = np.eye(2)
            lhs[2 * i:2 * i + 2, 2 + i] = -fr.tau[i]
        targets = np.linalg.lstsq(lhs, normal.reshape(-1), rcond=None)[0][2:]
        mu = np.array([solve_mu(i, mu[i], targets[i]) for i in range(3)])
        result = assemble()

    nodes = result.nodes
    ux_end = 0.5 * n * (3.0 * nodes[:, -1] - 4.0 * nodes[:, -2] + nodes[:, -3])
    uxx_end = float(n) * n * (2.0 * nodes[:, -1] - 5.0 * nodes[:, -2] + 4.0 * nodes[:, -3] - nodes[:, -4])
    report = CompatibilityReport(
        velocity_mismatch_before=before,
        velocity_mismatch_after=_velocity_mismatch(special_velocity(result, a)),
        endpoint_accel=np.hypot(*uxx_end.T) / np.hypot(*ux_end.T) ** 2,
        herring=float(np.hypot(*herring_residual(result, a))),
        mu=mu.copy(),
    )
    return result, report
