"""Exception hierarchy; the CLI maps each family to an exit code."""


class QWAbsorbError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QWAbsorbError, ValueError):
    """Invalid parameters or inconsistent inputs."""


class DomainError(ConfigurationError):
    """A numeric parameter lies outside its mathematical domain."""


class PreconditionError(ConfigurationError):
    """An input violates an operation's precondition (e.g. non-unit norm)."""


class ResourceError(QWAbsorbError):
    """The requested problem size exceeds the configured memory budget."""


class ConvergenceError(QWAbsorbError, ArithmeticError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InstabilityError(ConvergenceError):
    """A recurrence drifted outside its invariant bounds."""
