"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateConfigurationError(ValueError):
    """The input geometry is too degenerate for the requested operation."""


class UnsupportedDimensionError(ValueError):
    """The operation is only defined in certain space dimensions."""


class SolverFailureError(RuntimeError):
    """Iterative solve did not reach the requested tolerance.

    Carries the relative-residual history so callers can diagnose
    stagnation vs. slow convergence.
    """

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class ConfigError(ValueError):
    """A run configuration failed schema validation."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.get("message", str(d)) for d in self.diagnostics))
