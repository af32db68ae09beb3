"""Displaced triod relaxing to its anisotropic equilibrium.

Starts a straight triod with the junction moved off the minimizer of the
anisotropic length, integrates the flow and prints how the junction
approaches the Steiner point while the total length drops.

    python3 demos/equilibrium.py
"""

import numpy as np

from triodflow import Anisotropy, FlowConfig, TriodNetwork, aniso_lengths, run, steiner_point

P = np.array([[0.0, 1.0], [-0.9, -0.5], [0.95, -0.45]])
a = Anisotropy.fourier(0.1, 3, 0.0)

target = steiner_point(a, P).point
net = TriodNetwork.straight(target + [0.3, 0.2], P, 48)
print(f"equilibrium junction  {target[0]: .6f} {target[1]: .6f}")
print(f"{'t':>8} {'sum Lphi':>12} {'|q - q*|':>10}")

log = []


def sink(state, record):
    if state.step_index % 2000 == 0:
        log.append((state.t, record.total_lphi, np.hypot(*(state.net.junction - target))))


state, stop = run(net, a, FlowConfig(N=48, cfl=1.0, t_max=3.0), sink)
for t, L, d in log:
    print(f"{t:8.4f} {L:12.8f} {d:10.2e}")
print(f"stop: {stop} at t = {state.t:.4f}")
print(f"final |q - q*| = {np.hypot(*(state.net.junction - target)):.2e}")
print(f"straight length at q* = {aniso_lengths(TriodNetwork.straight(target, P, 48), a).sum():.8f}")
