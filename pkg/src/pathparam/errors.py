"""Exception hierarchy.

Two families exist so the command line can map failures to exit codes:
``DataError`` for inputs that violate a precondition (exit 2) and
``NumericalError`` for computations that break down (exit 3).
"""


class PathParamError(Exception):
    """Base class for every error raised by this package."""


class DataError(PathParamError):
    """Input data violates a documented precondition."""


class NumericalError(PathParamError):
    """A numerical procedure failed or hit a singular configuration."""


class DomainError(DataError):
    """Path parameter outside the curve or frame-field domain."""


class CurveConstructionError(DataError):
    """Curve or waypoint data cannot produce a valid curve."""


class ContinuityError(DataError):
    """Curve continuity class is too low for the requested quantity."""

    def __init__(self, required_order, available_order, quantity=""):
        self.required_order = required_order
        self.available_order = available_order
        what = f" for {quantity}" if quantity else ""
        super().__init__(
            f"curve must be C^{required_order}{what}; declared class is C^{available_order}"
        )


class PreconditionError(DataError):
    """Generic violated precondition (e.g. non-adapted initial frame)."""


class DegenerateParameterizationError(NumericalError):
    """Parametric speed vanished (irregular curve point)."""


class FrenetSingularityError(NumericalError):
    """Frenet-Serret frame undefined because curvature vanishes."""


class StepSizeError(NumericalError):
    """Exponential-map step would rotate by half a turn or more."""


class ProjectionError(NumericalError):
    """Closest-point search failed to converge."""


class SaddlePointError(ProjectionError):
    """Stationary point found is not a local minimum of the distance."""


class TubeOfValidityError(NumericalError):
    """Point lies at or beyond the local centre of curvature."""


class LpSolverError(NumericalError):
    """Simplex iterations broke down numerically."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class CorridorError(NumericalError):
    """Corridor generation is infeasible or a corridor is invalid."""


class StallError(NumericalError):
    """Progress rate too small for the time-to-space transformation."""


class TranscriptionError(DataError):
    """Optimal control problem cannot be transcribed as requested."""
