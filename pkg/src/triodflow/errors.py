"""Exception hierarchy shared by all triodflow modules."""


class TriodFlowError(Exception):
    """Base class for every error raised by this package."""


class ZeroVector(TriodFlowError, ValueError):
    """A direction-dependent quantity was requested for the zero vector."""


class NotElliptic(TriodFlowError, ValueError):
    """phi + phi'' fails to be positive somewhere on the unit circle."""

    def __init__(self, theta, value):
        self.theta = float(theta)
        self.value = float(value)
        super().__init__(f"anisotropy is not elliptic: psi({self.theta:.6g}) = {self.value:.6g} <= 0")


class Degenerate(TriodFlowError, ValueError):
    """A curve lost regularity (|u_x| below the floor)."""


class DegenerateJunction(TriodFlowError, ValueError):
    """Junction normals and tangents are too close to parallel to solve for lambda."""


class SpecViolation(TriodFlowError, ValueError):
    """Reparametrization parameters are outside their admissible range."""


class GeometricObstruction(TriodFlowError, ValueError):
    """A geometric condition cannot be repaired by reparametrization."""


class SolverFailure(TriodFlowError, RuntimeError):
    """The time step could not be completed."""


class NoConvergence(TriodFlowError, RuntimeError):
    """An iterative minimizer exhausted its evaluation budget."""


class FitDegenerate(TriodFlowError, ValueError):
    """A series is unsuitable for a blow-up rate fit."""


class ParseError(TriodFlowError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(TriodFlowError, ValueError):
    def __init__(self, field, message=""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class IoError(TriodFlowError, OSError):
    """An output file could not be written."""
