"""Acceptance criteria 1-10.

Each test ends in :func:`fixtures.verdict`, which records a PASS/FAIL line
that the terminal summary prints in criterion order.  The dissipation and
Herring criteria (5, 6) are evaluated over every monitored run of the
session, so they are placed last.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from fixtures import (
    FAMILIES,
    MIRROR_FAMILIES,
    SHORT_ARM_P,
    TRIANGLE,
    WORST,
    displaced_straight,
    mirror_triod,
    monitored_run,
    monitored_steps,
    short_arm_triod,
    verdict,
)
from triodflow import (
    Anisotropy,
    FlowConfig,
    FlowState,
    NotElliptic,
    TriodNetwork,
    aniso_curvature,
    curvature,
    ellipticity_bounds,
    make_compatible,
    polar_eval,
    polar_grad,
    psi,
    rate_fit,
    steiner_point,
)
from triodflow.geometry import d2_dx2, d_dx, frenet, junction_frame

RNG_SEED = 20240611


def _fd_phi(a, theta, h=1e-5):
    f = lambda t: polar_eval(a, np.stack([np.cos(t), np.sin(t)], axis=-1))  # noqa: E731
    f0, fp, fm = f(theta), f(theta + h), f(theta - h)
    return f0, (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / h**2


def test_criterion_01_anisotropy_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(RNG_SEED)
    theta = rng.uniform(-np.pi, np.pi, 100)
    v = np.stack([np.cos(theta), np.sin(theta)], axis=-1) * rng.uniform(0.5, 2.0, (100, 1))
    h = 1e-5
    worst = 0.0
    for a in FAMILIES.values():
        grad_fd = np.empty_like(v)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            grad_fd[:, j] = (polar_eval(a, v + e) - polar_eval(a, v - e)) / (2 * h)
        g = polar_grad(a, v)
        worst = max(worst, np.abs(g - grad_fd).max() / np.abs(grad_fd).max())
        phi, _, d2 = _fd_phi(a, theta)
        ref = phi * (phi + d2)
        worst = max(worst, np.abs(psi(a, theta) - ref).max() / np.abs(ref).max())
    m, M = ellipticity_bounds(Anisotropy.fourier(0.1, 3, 0.0))
    bounds_ok = abs(m - 0.22) <= 1e-4 and abs(M - 1.62) <= 1e-4
    with pytest.raises(NotElliptic):
        ellipticity_bounds(Anisotropy.fourier(0.2, 3, 0.0))
    elapsed = time.perf_counter() - t0
    verdict(1, worst <= 1e-5 and bounds_ok and elapsed < 1.0,
            f"max rel FD error {worst:.1e}, bounds ({m:.6f}, {M:.6f}), Fourier(0.2,3,0) rejected, {elapsed:.2f}s")


def test_criterion_02_isotropic_reduction():
    a = Anisotropy.isotropic()
    theta = np.linspace(-np.pi, np.pi, 101)
    s = np.linspace(0.0, 1.0, 65)
    arc = np.stack([np.cos(2 * s), np.sin(2 * s) + 0.3 * s**2], axis=-1)
    reduction = (np.all(psi(a, theta) == 1.0)
                 and np.allclose(aniso_curvature(arc, a), curvature(arc), rtol=0, atol=1e-14))

    ang = np.deg2rad([90.0, 210.0, 330.0])
    P = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    N = 128
    t0 = time.perf_counter()
    state, stop, _ = monitored_run(TriodNetwork.straight([0.1, 0.05], P, N), a, FlowConfig(N=N, cfl=1.0, t_max=2.0),
                                   label="c2 isotropic")
    elapsed = time.perf_counter() - t0
    tau = junction_frame(state.net, a).tau
    dots = np.array([tau[i] @ tau[j] for i, j in ((0, 1), (0, 2), (1, 2))])
    chords = P - state.net.junction
    chords /= np.hypot(*chords.T)[:, None]
    chord_dots = np.array([chords[i] @ chords[j] for i, j in ((0, 1), (0, 2), (1, 2))])
    err = np.abs(dots + 0.5).max()
    verdict(2, reduction and stop.kind == "MaxTimeReached" and err <= 1e-3 and elapsed < 30.0,
            f"psi==1, kappa_phi==kappa: {reduction}; t=2 tangent dots off cos120 by {err:.1e} "
            f"(endpoint chords {np.abs(chord_dots + 0.5).max():.1e}), {elapsed:.1f}s")


def test_criterion_03_stationarity():
    details, ok = [], True
    for name, a in FAMILIES.items():
        cfg = FlowConfig(N=64)
        qs = steiner_point(a, TRIANGLE).point
        s0 = FlowState(TriodNetwork.straight(qs, TRIANGLE, cfg.N))
        t0 = time.perf_counter()
        s1, _ = monitored_steps(s0, a, cfg, 100, label=f"c3 {name}")
        elapsed = time.perf_counter() - t0
        move = float(np.hypot(*(s1.net.junction - qs)))
        ok &= move <= 10 * cfg.newton_tol and elapsed < 10.0
        details.append(f"{name} {move:.1e} ({elapsed:.1f}s)")
    verdict(3, ok, "junction motion over 100 steps: " + ", ".join(details))


def test_criterion_04_equilibrium_convergence():
    details, ok = [], True
    for name, a in FAMILIES.items():
        net, qs = displaced_straight(a, 32)
        t0 = time.perf_counter()
        state, stop, _ = monitored_run(net, a, FlowConfig(N=32, cfl=1.0, t_max=4.0), label=f"c4 {name}")
        elapsed = time.perf_counter() - t0
        err = float(np.hypot(*(state.net.junction - qs)))
        ok &= stop.kind == "MaxTimeReached" and err <= 1e-3 and elapsed < 60.0
        details.append(f"{name} {err:.1e} ({elapsed:.1f}s)")
    verdict(4, ok, "|q(T) - steiner_point|: " + ", ".join(details))


def _evolution_fields(u, a):
    """theta, kappa and the right-hand sides of the theta and kappa evolution laws."""
    fr = frenet(u)
    uxx = d2_dx2(u)
    kappa = np.einsum("...i,...i->...", uxx, fr.nu) / fr.speed**2
    ps = psi(a, fr.theta)
    lam = ps * np.einsum("...i,...i->...", uxx, fr.tau) / fr.speed**2

    def ds(f):
        return d_dx(f[..., None])[..., 0] / fr.speed

    pk = ps * kappa
    theta_rhs = ds(pk) + lam * kappa
    kappa_rhs = ds(ds(pk)) + pk * kappa**2 + lam * ds(kappa)
    return fr.theta, kappa, theta_rhs, kappa_rhs


def _evolution_residuals(a, N, t_star=0.1, c=0.2):
    dt = c / N
    cfg = FlowConfig(N=N, reparam_every=0)
    label = f"c7 {a.family} N={N}"
    s, _ = monitored_steps(FlowState(TriodNetwork.straight([0.15, 0.1], TRIANGLE, N)), a, cfg,
                           int(round(t_star / dt)), dt=dt, label=label)
    s1, _ = monitored_steps(s, a, cfg, 1, dt=dt, label=label)
    th0, k0, _, _ = _evolution_fields(s.net.nodes, a)
    th1, k1, th_rhs, k_rhs = _evolution_fields(s1.net.nodes, a)
    inner = slice(N // 4, 3 * N // 4 + 1)
    dth = np.angle(np.exp(1j * (th1 - th0)))[:, inner] / dt
    dk = (k1 - k0)[:, inner] / dt
    return (np.abs(dth - th_rhs[:, inner]).max() / np.abs(th_rhs[:, inner]).max(),
            np.abs(dk - k_rhs[:, inner]).max() / np.abs(k_rhs[:, inner]).max())


def test_criterion_07_evolution_laws():
    details, ok = [], True
    for name in ("isotropic", "fourier"):
        a = FAMILIES[name]
        res = np.array([_evolution_residuals(a, N) for N in (32, 64, 128)])
        ratios = res[:-1] / res[1:]
        ok &= bool(np.all(ratios >= 1.8))
        details.append(f"{name} theta ratios {ratios[:, 0].round(2).tolist()} kappa ratios {ratios[:, 1].round(2).tolist()}")
    verdict(7, ok, "; ".join(details))


def test_criterion_08_maximal_time():
    a = Anisotropy.isotropic()
    degenerate = steiner_point(a, SHORT_ARM_P).degenerate
    cfg = FlowConfig(N=16, cfl=1.0, L_min=0.01, t_max=1.0)
    state, stop, mon = monitored_run(short_arm_triod(cfg.N), a, cfg, label="c8 short arm")
    final = float(mon.records[-1].L[0])
    vanish_ok = degenerate and stop.kind == "LengthVanishing" and stop.curve == 1 and final <= cfg.L_min \
        and state.t < cfg.t_max

    rng = np.random.default_rng(RNG_SEED)
    C, T = 0.7, 1.3
    t = np.linspace(0.0, 1.25, 400)
    y = C / np.sqrt(T - t)
    clean = rate_fit(np.column_stack([t, y]))
    noisy = rate_fit(np.column_stack([t, y * (1 + 0.01 * rng.standard_normal(t.size))]))
    fit_ok = (abs(clean.C / C - 1) <= 0.01 and abs(clean.T / T - 1) <= 0.01
              and abs(noisy.C / C - 1) <= 0.05 and abs(noisy.T / T - 1) <= 0.02)
    verdict(8, vanish_ok and fit_ok,
            f"{stop} at t={state.t:.4f} with L1={final:.2e} (minimizer at P1: {degenerate}); "
            f"rate_fit C/T errors clean {abs(clean.C / C - 1):.1e}/{abs(clean.T / T - 1):.1e}, "
            f"1% noise {abs(noisy.C / C - 1):.1e}/{abs(noisy.T / T - 1):.1e}")


def test_criterion_09_reparametrization_invariance():
    N = 64
    cfg = FlowConfig(N=N, t_max=0.5, reparam_every=0, cfl=0.5)
    details, ok = [], True
    for name, a in MIRROR_FAMILIES.items():
        raw = mirror_triod(a, N, warp=0.4)
        compatible, _ = make_compatible(raw, a)
        s1, w1, _ = monitored_run(raw, a, cfg, label=f"c9 {name} warped")
        s2, w2, _ = monitored_run(compatible, a, cfg, label=f"c9 {name} compatible")
        gap = float(np.hypot(*(s1.net.junction - s2.net.junction)))
        ok &= w1.kind == w2.kind == "MaxTimeReached" and gap <= 1e-3
        details.append(f"{name} {gap:.1e}")
    verdict(9, ok, "junction gap at t=0.5: " + ", ".join(details))


def test_criterion_10_determinism(tmp_path):
    config = {
        "anisotropy": {"family": "fourier", "a": 0.05, "k": 4, "theta0": 0.3},
        "endpoints": TRIANGLE.tolist(),
        "initial": {"kind": "straight", "junction": [0.15, 0.1]},
        "flow": {"N": 16, "t_max": 0.05},
        "output": {"csv": "run.csv"},
    }
    outputs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        (d / "config.json").write_text(json.dumps(config))
        proc = subprocess.run([sys.executable, "-m", "triodflow", "run", str(d / "config.json")],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append((d / "run.csv").read_bytes())
    rows = outputs[0].count(b"\n")
    verdict(10, outputs[0] == outputs[1], f"two CLI runs, {rows} CSV lines each, byte-identical: {outputs[0] == outputs[1]}")


def test_criterion_05_dissipation():
    if WORST["steps"] == 0:
        pytest.skip("no monitored runs in this session")
    offenders = ", ".join(sorted(WORST["offenders"])) or "none"
    verdict(5, WORST["rise"] <= 1e-6,
            f"max (sum L_phi increase)/dt = {WORST['rise']:.2e} over {WORST['steps']} monitored steps; "
            f"runs over the 1e-6 slack: {offenders}")


def test_criterion_06_herring():
    if WORST["steps"] == 0:
        pytest.skip("no monitored runs in this session")
    tol = FlowConfig().newton_tol
    verdict(6, WORST["herring"] <= tol,
            f"max Herring residual {WORST['herring']:.2e} over {WORST['steps']} monitored steps (newton_tol {tol:.0e})")
