"""Exception types shared across the package."""


class PhlError(Exception):
    """Base class for all package errors."""


class ConfigError(PhlError):
    """Invalid parameter combination (dimension, box side, p, K, tol, ...)."""


class StructureError(PhlError):
    """Inputs whose shapes or connectivity do not fit together."""


class LookupError_(PhlError):
    """Vertex or slice not present where required."""


class DomainError(PhlError):
    """Request outside the admissible spatial/temporal domain."""


class MarginError(DomainError):
    """Measurement window or horizon violates the boundary safety margin."""


class SequencingError(PhlError):
    """Kernel slices requested out of order / missing predecessor."""


class PreconditionError(PhlError):
    """Explicit precondition of an operation violated."""


class SolverError(PhlError):
    """Iterative solver failed to reach the requested tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
