"""Anisotropic curve shortening flow of planar triods with a triple junction."""

from .anisotropy import (
    Anisotropy,
    ellipticity_bounds,
    phi_theta,
    polar_eval,
    polar_grad,
    psi,
    wulff_boundary,
)
from .diagnostics import (
    DiagnosticsRecord,
    aniso_lengths,
    kphi_norms,
    lengths,
    rate_fit,
    steiner_point,
)
from .errors import *  # noqa: F401,F403
from .flow import FlowConfig, FlowState, StopReason, cfl_dt, run, step
from .geometry import (
    DiscreteCurve,
    TriodNetwork,
    admissibility_report,
    aniso_curvature,
    curvature,
    frenet,
    herring_residual,
    junction_lambdas,
)
from .reparam import ReparamSpec, lempara_reparam, make_compatible, to_constant_speed

__version__ = "0.1.0"
