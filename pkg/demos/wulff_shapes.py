"""Ellipticity bounds and Wulff shapes of the three anisotropy families.

Writes one SVG per family next to this script and prints the bounds
``min psi`` and ``max psi`` that set the time step of the flow.

    python3 demos/wulff_shapes.py
"""

from pathlib import Path

import numpy as np

from triodflow import Anisotropy, NotElliptic, ellipticity_bounds, wulff_boundary

FAMILIES = {
    "isotropic": Anisotropy.isotropic(),
    "fourier3": Anisotropy.fourier(0.1, 3, 0.0),
    "fourier4": Anisotropy.fourier(0.06, 4, np.pi / 8),
    "elliptic": Anisotropy.elliptic([[1.0, 0.0], [0.0, 2.0]]),
}

out = Path(__file__).with_suffix("")
out.mkdir(exist_ok=True)
for name, a in FAMILIES.items():
    m, M = ellipticity_bounds(a)
    W = wulff_boundary(a, 240)
    print(f"{name:10s} psi in [{m:.4f}, {M:.4f}]  Wulff diameter {np.ptp(W, axis=0).max():.4f}")
    pts = " ".join(f"{150 + 100 * x:.2f},{150 - 100 * y:.2f}" for x, y in W)
    (out / f"{name}.svg").write_text(
        '<svg xmlns="http://www.w3.org/2000/svg" width="300" height="300">'
        f'<polygon points="{pts}" fill="none" stroke="black"/></svg>\n')

try:
    ellipticity_bounds(Anisotropy.fourier(0.2, 3, 0.0))
except NotElliptic as exc:
    print(f"fourier a=0.2 k=3 rejected: {exc}")
