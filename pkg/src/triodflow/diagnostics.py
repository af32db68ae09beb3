"""Scalar functionals of a triod, per-step records, rate fitting and the
Steiner-point oracle.

Integrals use the trapezoidal rule on the parameter grid with
``ds = |u_x| dx``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import spearmanr

from .anisotropy import Anisotropy, phi_theta, polar_eval, polar_grad
from .errors import DegenerateJunction, FitDegenerate, NoConvergence
from .geometry import _nodes, a0_from_frame, d2_dx2, d_dx, frenet, junction_frame, lambdas_from_frame, perp

__all__ = [
    "DiagnosticsRecord",
    "CSV_HEADER",
    "lengths",
    "aniso_lengths",
    "kphi_norms",
    "interpolation_ratio",
    "compute_record",
    "rate_fit",
    "RateFit",
    "steiner_point",
    "SteinerResult",
    "steiner_energy",
    "nelder_mead",
]

# Spearman correlation of (t, y) on the trailing half below which rate_fit gives up
MONOTONE_RANK_CORR = 0.8

CSV_HEADER = "t,L1,L2,L3,Lphi1,Lphi2,Lphi3,kphi_l2sq,kphi_h1sq,herring_res,qx,qy,a0_min,lambda_mismatch"


def _trapz(f, n):
    f = np.asarray(f)
    return (f[..., 1:-1].sum(axis=-1) + 0.5 * (f[..., 0] + f[..., -1])) / n


def lengths(net):
    """Euclidean length of each curve (shape ``(...,)`` over leading axes)."""
    u = _nodes(net)
    speed = frenet(u).speed
    return _trapz(speed, u.shape[-2] - 1)


def aniso_lengths(net, a: Anisotropy):
    """Anisotropic length ``int phi°(nu) ds`` of each curve."""
    u = _nodes(net)
    fr = frenet(u)
    phi, _, _ = phi_theta(a, fr.theta)
    return _trapz(phi * fr.speed, u.shape[-2] - 1)


def _curvature_fields(u, a, delta_reg=1e-12):
    fr = frenet(u, delta_reg)
    kappa = np.einsum("...i,...i->...", d2_dx2(u), fr.nu) / fr.speed**2
    phi, _, d2phi = phi_theta(a, fr.theta)
    kphi = (phi + d2phi) * kappa
    return fr, phi, kphi


def kphi_norms(net, a: Anisotropy):
    """``(sum int kphi^2 phi° ds, that + sum int (d_s kphi)^2 ds)``."""
    u = _nodes(net)
    n = u.shape[-2] - 1
    fr, phi, kphi = _curvature_fields(u, a)
    l2 = _trapz(kphi**2 * phi * fr.speed, n)
    dks = d_dx(kphi[..., None])[..., 0] / fr.speed
    h1 = l2 + _trapz(dks**2 * fr.speed, n)
    return float(np.sum(l2)), float(np.sum(h1))


def interpolation_ratio(f, c):
    """``||d_s f||_inf / (||d_s^2 f||_2^(3/4) ||f||_2^(1/4) + ||f||_2 / L^(3/2))``
    for nodal values ``f`` on a single curve ``c``."""
    u = _nodes(c)
    n = u.shape[0] - 1
    speed = frenet(u).speed
    f = np.asarray(f, dtype=float)
    fs = d_dx(f[:, None])[:, 0] / speed
    fss = d_dx(fs[:, None])[:, 0] / speed
    L = _trapz(speed, n)
    l2 = np.sqrt(_trapz(f**2 * speed, n))
    l2ss = np.sqrt(_trapz(fss**2 * speed, n))
    return float(np.abs(fs).max() / (l2ss**0.75 * l2**0.25 + l2 / L**1.5))


@dataclass
class DiagnosticsRecord:
    t: float
    L: np.ndarray
    Lphi: np.ndarray
    kphi_l2sq: float
    kphi_h1sq: float
    herring_res: float
    junction: np.ndarray
    a0_min: float
    lambda_mismatch: float
    step_index: int = 0
    dt: float = 0.0
    # total anisotropic length of the state the step started from (after any resampling)
    lphi_start: float = float("nan")
    resampled: bool = False
    hc_projected: bool = False

    @property
    def total_lphi(self) -> float:
        return float(np.sum(self.Lphi))

    def values(self):
        return [self.t, *self.L, *self.Lphi, self.kphi_l2sq, self.kphi_h1sq, self.herring_res,
                *self.junction, self.a0_min, self.lambda_mismatch]

    def csv_row(self) -> str:
        return ",".join(format(float(v), ".17g") for v in self.values())


def compute_record(state, a: Anisotropy, a0_floor: float = 0.05, dt: float = 0.0,
                   lphi_start: float = float("nan"), resampled: bool = False) -> DiagnosticsRecord:
    """Diagnostics of a flow state (any object with ``net``, ``t``, ``step_index``)."""
    return _record_and_frame(state, a, a0_floor, dt, lphi_start, resampled)[0]


def _record_and_frame(state, a, a0_floor, dt, lphi_start, resampled, delta_reg=1e-12):
    net = state.net
    u = net.nodes
    n = net.N
    fr, phi, kphi = _curvature_fields(u, a, delta_reg)
    L = _trapz(fr.speed, n)
    Lphi = _trapz(phi * fr.speed, n)
    l2 = _trapz(kphi**2 * phi * fr.speed, n)
    dks = d_dx(kphi[..., None])[..., 0] / fr.speed
    h1 = l2 + _trapz(dks**2 * fr.speed, n)
    jf = junction_frame(net, a)
    hc = float(np.hypot(*polar_grad(a, jf.nu).sum(axis=0)))
    a0 = a0_from_frame(jf)
    try:
        mismatch = lambdas_from_frame(jf, a, a0_floor).mismatch
    except DegenerateJunction:
        mismatch = float("nan")
    record = DiagnosticsRecord(
        t=float(state.t), L=L, Lphi=Lphi, kphi_l2sq=float(l2.sum()), kphi_h1sq=float(h1.sum()),
        herring_res=hc, junction=np.array(net.junction), a0_min=a0, lambda_mismatch=mismatch,
        step_index=int(state.step_index), dt=float(dt), lphi_start=float(lphi_start), resampled=resampled,
    )
    return record, fr


class RateFit(NamedTuple):
    C: float
    T: float
    rms: float


def _fit_for_T(t, y, T):
    g = 1.0 / np.sqrt(T - t)
    C = float(y @ g / (g @ g))
    return C, float(np.sqrt(np.mean((y - C * g) ** 2)))


def rate_fit(series) -> RateFit:
    """Least-squares fit of ``y = C / sqrt(T - t)`` on the trailing half of a series.

    The trailing half must be increasing up to noise (rank correlation with
    ``t`` at least ``MONOTONE_RANK_CORR``), otherwise :class:`FitDegenerate`.

    ``T`` is scanned on 200 points of ``(t_last, t_last + 2 (t_last - t_first)]``
    with the optimal ``C`` in closed form for each candidate, then refined by a
    bounded scalar minimization between the neighbours of the best grid point.
    """
    data = np.asarray(series, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 8:
        raise FitDegenerate("need at least 8 (t, y) pairs")
    t, y = data[:, 0], data[:, 1]
    if np.any(np.diff(t) <= 0.0):
        raise FitDegenerate("times must be strictly increasing")
    if np.any(y <= 0.0):
        raise FitDegenerate("values must be positive")
    half = data.shape[0] // 2
    tt, yy = t[half:], y[half:]
    # monotone up to noise: strong rank correlation between t and y
    rho = spearmanr(tt, yy).statistic if np.ptp(yy) > 0.0 else 0.0
    if not rho >= MONOTONE_RANK_CORR:
        raise FitDegenerate("series is not increasing over its trailing half")
    t_first, t_last = t[0], t[-1]
    span = 2.0 * (t_last - t_first)
    grid = t_last + span * np.arange(1, 201) / 200
    rms = np.array([_fit_for_T(tt, yy, T)[1] for T in grid])
    j = int(np.argmin(rms))
    lo = grid[j - 1] if j > 0 else t_last + 1e-6 * span
    hi = grid[min(j + 1, grid.size - 1)]
    best_T, best_rms = grid[j], rms[j]
    if hi > lo:
        res = minimize_scalar(lambda T: _fit_for_T(tt, yy, T)[1], bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * span})
        if res.fun < best_rms:
            best_T, best_rms = float(res.x), float(res.fun)
    C, rms_val = _fit_for_T(tt, yy, best_T)
    return RateFit(C, float(best_T), rms_val)


def nelder_mead(f, x0, step, xtol=1e-12, max_evals=100_000, coeffs=(1.0, 2.0, 0.5, 0.5)):
    """Minimize ``f`` from ``x0`` with the Nelder-Mead simplex method.

    Stops when the simplex diameter falls below ``xtol``.  ``coeffs`` are the
    reflection, expansion, contraction and shrink factors.  Returns
    ``(x_best, f_best, n_evals)``; raises :class:`NoConvergence` when the
    evaluation budget runs out.
    """
    alpha, gamma, rho, sigma = coeffs
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    simplex = [x0.copy()]
    for j in range(dim):
        v = x0.copy()
        v[j] += step
        simplex.append(v)
    simplex = np.array(simplex)
    fvals = np.array([f(v) for v in simplex])
    evals = dim + 1

    def diameter():
        d = simplex[:, None, :] - simplex[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    while diameter() > xtol:
        if evals >= max_evals:
            raise NoConvergence(f"Nelder-Mead used {evals} evaluations")
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - simplex[-1])
        fr = f(xr)
        evals += 1
        if fvals[0] <= fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            evals += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + rho * (xr - centroid)
        else:
            xc = centroid + rho * (simplex[-1] - centroid)
        fc = f(xc)
        evals += 1
        if fc < min(fr, fvals[-1]):
            simplex[-1], fvals[-1] = xc, fc
            continue
        simplex[1:] = simplex[0] + sigma * (simplex[1:] - simplex[0])
        fvals[1:] = [f(v) for v in simplex[1:]]
        evals += dim
    j = int(np.argmin(fvals))
    return simplex[j].copy(), float(fvals[j]), evals


def steiner_energy(a: Anisotropy, P, q):
    """Anisotropic length ``sum_i phi°((P^i - q)^perp)`` of the straight triod from ``q``."""
    P = np.asarray(P, dtype=float).reshape(3, 2)
    return float(np.sum(polar_eval(a, perp(P - np.asarray(q, dtype=float)))))


def _hc_straight(a, P, q):
    return polar_grad(a, perp(P - q)).sum(axis=0)


class SteinerResult(NamedTuple):
    point: np.ndarray
    degenerate: bool
    residual: float
    evaluations: int


def steiner_point(a: Anisotropy, P, q0=None) -> SteinerResult:
    """Junction position minimizing the anisotropic length of a straight triod.

    Nelder-Mead (restarted once from its best vertex) on the energy, followed
    by a few Newton steps on the energy gradient to remove the
    ``sqrt(machine eps)`` floor of a value-only search.  When the minimizer
    sits on an endpoint the endpoint is returned with ``degenerate=True``.
    """
    P = np.asarray(P, dtype=float).reshape(3, 2)
    diam = max(np.hypot(*(P[i] - P[j])) for i in range(3) for j in range(i + 1, 3))
    if min(np.hypot(*(P[i] - P[j])) for i in range(3) for j in range(i + 1, 3)) == 0.0:
        raise ValueError("endpoints must be pairwise distinct")
    q0 = P.mean(axis=0) if q0 is None else np.asarray(q0, dtype=float)

    def energy(q):
        return steiner_energy(a, P, q)

    tol = 1e-12 * max(1.0, diam)
    q, _, evals = nelder_mead(energy, q0, 0.1 * diam, tol)
    q, _, more = nelder_mead(energy, q, 0.01 * diam, tol, max_evals=100_000 - evals)
    evals += more

    dist = np.hypot(*(P - q).T)
    i = int(np.argmin(dist))
    if dist[i] <= 1e-6 * diam:
        return SteinerResult(P[i].copy(), True, float("nan"), evals)

    # Newton polish on the gradient (the Herring sum of the straight triod)
    h = 1e-7 * diam
    for _ in range(20):
        r = _hc_straight(a, P, q)
        if np.hypot(*r) <= 1e-15:
            break
        J = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            J[:, j] = (_hc_straight(a, P, q + e) - _hc_straight(a, P, q - e)) / (2.0 * h)
        dq = -np.linalg.solve(J, r)
        if np.hypot(*dq) > 1e-4 * diam or not np.all(np.isfinite(dq)):
            break
        q_new = q + dq
        if np.hypot(*_hc_straight(a, P, q_new)) >= np.hypot(*r):
            break
        q = q_new
    return SteinerResult(q, False, float(np.hypot(*_hc_straight(a, P, q))), evals)
