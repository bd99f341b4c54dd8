"""Exception types shared across the package."""


class VemflowError(Exception):
    """Base class for all package errors."""


class InvalidInputError(VemflowError):
    """Bad user-supplied argument (degenerate bounds, unknown variant, ...)."""


class InvalidMeshError(VemflowError):
    """Mesh fails a structural invariant (orientation, pairing, degeneracy)."""


class IllShapedCellError(VemflowError):
    """A local projector system is singular or dangerously conditioned."""


class InvalidCoefficientError(VemflowError):
    """A coefficient field violates its declared bounds at a sample point."""


class UnsupportedDegreeError(VemflowError):
    """Requested polynomial degree is outside the supported range."""


class ConfigError(VemflowError):
    """Inconsistent solver or stabilization configuration."""


class SolverFailureError(VemflowError):
    """A linear solve broke down (singular system, NaNs, ...)."""


class ConvergenceFailureError(SolverFailureError):
    """A linear solve finished above the requested residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
