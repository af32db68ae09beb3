"""Smooth planar anisotropies described through their angle function.

An anisotropy is stored by the values of its polar norm on the unit circle,
``phi(theta) = phi°(cos theta, sin theta)``.  Everything the flow needs (the
polar norm itself, its gradient, the coefficient ``psi = phi (phi + phi'')``)
follows from ``phi``, ``phi'`` and ``phi''`` together with 1-homogeneity.

Orientation conventions: the unit normal is ``nu = (cos theta, sin theta)``
and the unit tangent is ``tau = (sin theta, -cos theta)``, so ``nu = tau^perp``
with ``(a, b)^perp = (-b, a)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import NotElliptic, ValidationError, ZeroVector

__all__ = [
    "Anisotropy",
    "phi_theta",
    "polar_eval",
    "polar_grad",
    "psi",
    "ellipticity_bounds",
    "wulff_boundary",
]

FAMILIES = ("isotropic", "fourier", "elliptic")


@dataclass(frozen=True)
class Anisotropy:
    """Immutable description of a smooth anisotropy.

    Use the ``isotropic``, ``fourier`` and ``elliptic`` constructors rather than
    the raw initializer.  Ellipticity is not checked here; see
    :func:`ellipticity_bounds`.
    """

    family: str
    a: float = 0.0
    k: int = 0
    theta0: float = 0.0
    A: tuple = field(default=((1.0, 0.0), (0.0, 1.0)))

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError("family", f"unknown anisotropy family {self.family!r}")
        if self.family == "fourier":
            if int(self.k) != self.k or self.k < 2:
                raise ValidationError("k", "Fourier frequency must be an integer >= 2")
            if not np.isfinite(self.a) or not np.isfinite(self.theta0):
                raise ValidationError("a", "Fourier parameters must be finite")
            if abs(self.a) >= 1.0:
                raise ValidationError("a", "|a| < 1 is needed for phi > 0")
        if self.family == "elliptic":
            A = np.asarray(self.A, dtype=float)
            if A.shape != (2, 2) or not np.all(np.isfinite(A)):
                raise ValidationError("A", "expected a finite 2x2 matrix")
            if A[0, 1] != A[1, 0]:
                raise ValidationError("A", "matrix must be symmetric")
            if np.linalg.eigvalsh(A).min() <= 0.0:
                raise ValidationError("A", "matrix must be positive definite")

    @classmethod
    def isotropic(cls) -> "Anisotropy":
        return cls("isotropic")

    @classmethod
    def fourier(cls, a: float, k: int, theta0: float = 0.0) -> "Anisotropy":
        """``phi(theta) = 1 + a cos(k (theta - theta0))``."""
        return cls("fourier", a=float(a), k=int(k), theta0=float(theta0))

    @classmethod
    def elliptic(cls, A) -> "Anisotropy":
        """``phi°(x) = sqrt(x^T A x)`` for a symmetric positive definite ``A``."""
        A = np.asarray(A, dtype=float)
        return cls("elliptic", A=tuple(tuple(float(v) for v in row) for row in A))

    def to_dict(self) -> dict:
        if self.family == "isotropic":
            return {"family": "isotropic"}
        if self.family == "fourier":
            return {"family": "fourier", "a": self.a, "k": self.k, "theta0": self.theta0}
        return {"family": "elliptic", "A": [list(row) for row in self.A]}

    @classmethod
    def from_dict(cls, d: dict) -> "Anisotropy":
        family = d.get("family")
        if family == "isotropic":
            return cls.isotropic()
        if family == "fourier":
            return cls.fourier(d["a"], d["k"], d.get("theta0", 0.0))
        if family == "elliptic":
            return cls.elliptic(d["A"])
        raise ValidationError("family", f"unknown anisotropy family {family!r}")

    def rotated(self, angle: float) -> "Anisotropy":
        """The anisotropy of a rotated frame: ``phi_new(theta) = phi(theta - angle)``."""
        if self.family == "isotropic":
            return self
        if self.family == "fourier":
            return Anisotropy.fourier(self.a, self.k, self.theta0 + angle)
        c, s = np.cos(angle), np.sin(angle)
        R = np.array([[c, -s], [s, c]])
        A = R @ np.asarray(self.A) @ R.T
        A = 0.5 * (A + A.T)
        return Anisotropy.elliptic(A)


def phi_theta(a: Anisotropy, theta):
    """Angle function and its first two derivatives.

    Returns
    -------
    (phi, dphi, d2phi) : arrays broadcast to the shape of ``theta``.
    """
    theta = np.asarray(theta, dtype=float)
    if a.family == "isotropic":
        zero = np.zeros_like(theta)
        return zero + 1.0, zero, zero
    if a.family == "fourier":
        arg = a.k * (theta - a.theta0)
        c, s = np.cos(arg), np.sin(arg)
        return 1.0 + a.a * c, -a.a * a.k * s, -a.a * a.k**2 * c
    (a11, a12), (_, a22) = a.A
    c, s = np.cos(theta), np.sin(theta)
    g = a11 * c * c + 2.0 * a12 * c * s + a22 * s * s
    s2, c2 = np.sin(2.0 * theta), np.cos(2.0 * theta)
    dg = (a22 - a11) * s2 + 2.0 * a12 * c2
    d2g = 2.0 * (a22 - a11) * c2 - 4.0 * a12 * s2
    phi = np.sqrt(g)
    dphi = dg / (2.0 * phi)
    d2phi = d2g / (2.0 * phi) - dg * dg / (4.0 * phi**3)
    return phi, dphi, d2phi


def polar_eval(a: Anisotropy, v):
    """Polar norm ``phi°(v) = |v| phi(atan2(v_y, v_x))``; zero at the origin.

    ``v`` may carry leading batch dimensions, the last axis has length 2.
    """
    v = np.asarray(v, dtype=float)
    r = np.hypot(v[..., 0], v[..., 1])
    if a.family == "elliptic":
        A = np.asarray(a.A)
        return np.sqrt(np.einsum("...i,ij,...j->...", v, A, v))
    phi, _, _ = phi_theta(a, np.arctan2(v[..., 1], v[..., 0]))
    return r * phi


def polar_grad(a: Anisotropy, v):
    """Gradient of the polar norm, ``D phi°(nu) = phi(theta) nu - phi'(theta) tau``.

    The gradient is 0-homogeneous, so only the direction of ``v`` matters.
    Raises :class:`ZeroVector` if any ``v`` vanishes.
    """
    v = np.asarray(v, dtype=float)
    r = np.hypot(v[..., 0], v[..., 1])
    if np.any(r == 0.0):
        raise ZeroVector("polar gradient is undefined at the origin")
    out = np.empty(v.shape)
    if a.family == "isotropic":
        out[...] = v / r[..., None]
        return out
    theta = np.arctan2(v[..., 1], v[..., 0])
    phi, dphi, _ = phi_theta(a, theta)
    c, s = np.cos(theta), np.sin(theta)
    # nu = (c, s), tau = (s, -c)
    out[..., 0] = phi * c - dphi * s
    out[..., 1] = phi * s + dphi * c
    return out


def psi(a: Anisotropy, theta):
    """Mobility-stiffness coefficient ``psi = phi (phi + phi'')``."""
    phi, _, d2phi = phi_theta(a, theta)
    return phi * (phi + d2phi)


@functools.lru_cache(maxsize=64)
def _bounds_cached(a: Anisotropy, n_samples: int):
    theta = 2.0 * np.pi * np.arange(n_samples) / n_samples
    phi, _, d2phi = phi_theta(a, theta)
    values = phi * (phi + d2phi)
    j = int(np.argmin(values))
    if phi.min() <= 0.0 or values[j] <= 0.0:
        jp = int(np.argmin(phi))
        if phi[jp] <= 0.0:
            raise NotElliptic(theta[jp], phi[jp])
        raise NotElliptic(theta[j], values[j])
    return float(values.min()), float(values.max())


def ellipticity_bounds(a: Anisotropy, n_samples: int = 3600):
    """Sampled bounds ``(m, M)`` with ``m <= psi <= M`` on a uniform angle grid.

    Raises :class:`NotElliptic` (carrying the offending angle) when ``psi``
    is not strictly positive on the grid.
    """
    if n_samples < 360:
        raise ValueError("n_samples must be at least 360")
    return _bounds_cached(a, int(n_samples))


def wulff_boundary(a: Anisotropy, n: int):
    """Points ``D phi°(nu(theta_j))`` for ``n`` uniform angles; they trace the
    boundary of the Wulff shape counter-clockwise."""
    if n < 4:
        raise ValueError("n must be at least 4")
    ellipticity_bounds(a)
    theta = 2.0 * np.pi * np.arange(n) / n
    nu = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return polar_grad(a, nu)
