"""Geometric fixtures shared by the test modules."""

import numpy as np
from scipy.optimize import brentq, fsolve

from triodflow import Anisotropy, TriodNetwork, aniso_lengths, herring_residual, run, step, steiner_point
from triodflow.diagnostics import compute_record
from triodflow.flow import _due_for_resample, _resample

TRIANGLE = np.array([[0.0, 1.0], [-0.9, -0.5], [0.9, -0.5]])

FAMILIES = {
    "isotropic": Anisotropy.isotropic(),
    "fourier": Anisotropy.fourier(0.1, 3, 0.0),
    "elliptic": Anisotropy.elliptic([[1.0, 0.0], [0.0, 2.0]]),
}

# all three satisfy phi(-theta) = phi(theta), which is what a triod mirrored in
# x -> -x needs: the normals of mirrored curves are reflected in y -> -y
MIRROR_FAMILIES = FAMILIES

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _bent_arc(direction, length, amp, bend, s):
    """Points at arc lengths ``s`` of a curve leaving the origin along ``direction``
    with curvature ``amp (1 - s/bend)^3`` on ``[0, bend]`` and zero afterwards."""
    theta0 = np.arctan2(direction[1], direction[0])

    def angle(t):
        t = np.minimum(t, bend)
        return theta0 + amp * bend * (1.0 - (1.0 - t / bend) ** 4) / 4.0

    pts = np.zeros((s.size, 2))
    for k in range(1, s.size):
        a, b = s[k - 1], s[k]
        t = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
        th = angle(t)
        pts[k] = pts[k - 1] + 0.5 * (b - a) * np.array([_GL_W @ np.cos(th), _GL_W @ np.sin(th)])
    return pts


def mirror_triod(a, N, amp=1.5, warp=0.0, length=1.0, bend=0.6, exact_hc=True):
    """Mirror-symmetric triod: curve 3 runs straight down the y axis, curves 1 and 2
    are reflections of each other and bend near the junction only.

    The junction directions are those of the straight equilibrium for ``a``
    (which must be reflection symmetric), so the Herring condition holds up to
    the discretization of the junction tangent, and the anisotropic curvature
    vanishes identically near the fixed ends.  ``warp`` in ``[0, 1)`` samples
    the curves with the non-uniform parametrization ``s = L (x + warp x (1 - x))``.
    With ``exact_hc`` the bent curves are rotated about the junction by the
    small angle that makes the discrete Herring residual vanish.
    """
    P = np.array([[np.cos(np.pi / 6), np.sin(np.pi / 6)], [-np.cos(np.pi / 6), np.sin(np.pi / 6)], [0.0, -1.0]])
    q = steiner_point(a, P).point
    d1 = (P[0] - q) / np.hypot(*(P[0] - q))
    x = np.arange(N + 1) / N
    s = length * (x + warp * x * (1.0 - x))
    c1 = _bent_arc(d1, length, amp, bend * length, s)
    c3 = np.column_stack([np.zeros_like(s), -s])

    def build(beta):
        c, sn = np.cos(beta), np.sin(beta)
        r1 = c1 @ np.array([[c, sn], [-sn, c]])
        return TriodNetwork(np.stack([r1, r1 * np.array([-1.0, 1.0]), c3]))

    if not exact_hc:
        return build(0.0)
    beta = brentq(lambda b: herring_residual(build(b), a)[0], -0.2, 0.2, xtol=1e-15)
    return build(beta)


def displaced_straight(a, N, fraction=0.2, angle=1.0, P=TRIANGLE):
    qs = steiner_point(a, P).point
    diam = max(np.hypot(*(P[i] - P[j])) for i in range(3) for j in range(3))
    q0 = qs + fraction * diam * np.array([np.cos(angle), np.sin(angle)])
    return TriodNetwork.straight(q0, P, N), qs


def _bump_arc(q, direction, turn, length, n):
    """``n + 1`` equally spaced points of a curve of given ``length`` leaving ``q``
    along ``direction``; it is straight on the first and last quarter and turns
    by ``turn`` in between with curvature proportional to ``sin^2``."""
    theta0 = np.arctan2(direction[1], direction[0])

    def angle(t):
        x = np.clip(t / length, 0.25, 0.75) - 0.25
        return theta0 + turn * (2.0 * x - np.sin(4.0 * np.pi * x) / (2.0 * np.pi))

    s = length * np.arange(n + 1) / n
    pts = np.zeros((n + 1, 2))
    pts[0] = q
    for k in range(1, n + 1):
        a, b = s[k - 1], s[k]
        t = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
        th = angle(t)
        pts[k] = pts[k - 1] + 0.5 * (b - a) * np.array([_GL_W @ np.cos(th), _GL_W @ np.sin(th)])
    return pts


SHORT_ARM_P = np.array([[0.0, 0.0], [-0.05, 0.5], [-0.05, -0.5]])


def short_arm_triod(N, q0=(-0.03, 0.0), P=SHORT_ARM_P):
    """Isotropic triod whose equilibrium junction would be the endpoint ``P[0]``
    (the angle there exceeds 120 degrees).  Curve 1 runs straight from ``q0``
    to ``P[0]``; curves 2 and 3 leave ``q0`` at 120 degrees to it and bend in
    their middle halves to reach their endpoints.  The junction tangents and
    the vanishing end curvature are exact for the one-sided stencils (N >= 12).
    """
    q0 = np.asarray(q0, dtype=float)
    d1 = (P[0] - q0) / np.hypot(*(P[0] - q0))
    curves = []
    for i, rot in enumerate((0.0, 2.0 * np.pi / 3.0, -2.0 * np.pi / 3.0)):
        d = np.array([[np.cos(rot), -np.sin(rot)], [np.sin(rot), np.cos(rot)]]) @ d1
        if i == 0:
            curves.append(_bump_arc(q0, d, 0.0, np.hypot(*(P[0] - q0)), N))
            continue

        def miss(x, d=d, i=i):
            return _bump_arc(q0, d, x[0], x[1], N)[-1] - P[i]

        chord = P[i] - q0
        x0 = [np.arctan2(*chord[::-1]) - np.arctan2(*d[::-1]), np.hypot(*chord)]
        x = fsolve(miss, x0, xtol=1e-12)
        pts = _bump_arc(q0, d, x[0], x[1], N)
        pts[-1] = P[i]
        curves.append(pts)
    return TriodNetwork(np.stack(curves))


class StepMonitor:
    """Flow sink recording the worst dissipation and Herring defects of a run.

    ``rise`` is the largest ``(sum L_phi after - sum L_phi before) / dt`` over
    the accepted steps and ``herring`` the largest Herring residual.  Every
    monitored run also updates the module-wide totals in ``WORST``.
    """

    def __init__(self, inner=None, label="run"):
        self.inner = inner
        self.label = label
        self.rise = -np.inf
        self.herring = 0.0
        self.records = []

    def __call__(self, state, record):
        self.rise = max(self.rise, (record.total_lphi - record.lphi_start) / record.dt)
        self.herring = max(self.herring, record.herring_res)
        WORST["rise"] = max(WORST["rise"], self.rise)
        WORST["herring"] = max(WORST["herring"], self.herring)
        WORST["steps"] += 1
        if record.total_lphi - record.lphi_start > 1e-6 * record.dt:
            WORST["offenders"].add(self.label)
        self.records.append(record)
        if self.inner is not None:
            self.inner(state, record)


WORST = {"rise": -np.inf, "herring": 0.0, "steps": 0, "offenders": set()}


def monitored_run(net, a, cfg, inner=None, label="run"):
    mon = StepMonitor(inner, label)
    state, stop = run(net, a, cfg, mon)
    return state, stop, mon


def monitored_steps(state, a, cfg, count, dt=None, label="steps"):
    """``count`` calls of :func:`step` with the same bookkeeping as a monitored run."""
    mon = StepMonitor(label=label)
    for _ in range(count):
        new = step(state, a, cfg, dt=dt)
        h = new.t - state.t
        start = _resample(state.net) if _due_for_resample(state, cfg) else state.net
        before = float(np.sum(aniso_lengths(start, a)))
        mon(new, compute_record(new, a, cfg.a0_floor, h, before))
        state = new
    return state, mon


# criterion number -> (passed, detail), printed by the terminal summary hook
ACCEPTANCE = {}


def verdict(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {n}: {detail}"
