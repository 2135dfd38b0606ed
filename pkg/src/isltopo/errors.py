"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """A configuration value is invalid.

    ``field`` names the offending parameter so CLI users can find it.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class EigenSolverError(ArithmeticError):
    """The eigensolver did not reach the requested residual tolerance."""

    def __init__(self, message, best_residual=None):
        self.best_residual = best_residual
        if best_residual is not None:
            message = f"{message} (best residual {best_residual:.3e})"
        super().__init__(message)


class UndefinedMetricError(ValueError):
    """A metric was requested on an input where it is not defined."""


class InfeasibleError(ValueError):
    """The requested problem has no feasible solution."""


class OracleRefusal(ValueError):
    """An exhaustive test oracle was asked to handle an instance too large to enumerate."""
