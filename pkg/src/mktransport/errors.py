"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed numeric input (non-finite entries, wrong shape)."""


class DomainError(ValueError):
    """Query point outside the mathematical domain of an operation."""


class SingularPointError(DomainError):
    """Gradient (or another single-valued field) requested at a singular point."""


class ConfigurationError(Exception):
    """Scenario/config file cannot be parsed or is missing required data."""


class ValidationError(Exception):
    """A geometric or analytic hypothesis check failed for the given inputs."""


class IterationLimitError(RuntimeError):
    """An iterative solver hit its iteration cap before converging."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
