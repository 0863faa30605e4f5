"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Invalid geometric construction (degenerate arc, inverted patch, ...)."""


class NonConformingError(ValueError):
    """Two patch edges that must share a discretization do not match."""


class SingularSystemError(RuntimeError):
    """A factorization failed or a solve produced an unusable residual."""


class InverseMapError(RuntimeError):
    """Newton inversion of a geometry map did not converge.

    Carries the best residual reached so the caller can retry with a
    different initial guess.
    """

    def __init__(self, message, residual=None, uv=None):
        super().__init__(message)
        self.residual = residual
        self.uv = uv


class IterationError(RuntimeError):
    """An iterative scheme hit its iteration cap; carries the error history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else []


class ConfigError(ValueError):
    """A run configuration is missing, malformed, or inconsistent."""
