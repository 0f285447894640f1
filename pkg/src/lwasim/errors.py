"""Exception types shared across the package."""


class LwaError(Exception):
    """Base class for all package errors."""


class DomainError(LwaError, ValueError):
    """Argument outside the physical domain of a formula (e.g. below cutoff)."""


class ConfigError(LwaError, ValueError):
    """Invalid scenario or experiment configuration.

    ``code`` is a short machine-readable identifier, ``path`` the dotted
    location of the offending config entry (empty when not applicable).
    """

    def __init__(self, message: str, code: str = "invalid_config", path: str = ""):
        super().__init__(message)
        self.code = code
        self.path = path


class InfeasibleError(LwaError, ValueError):
    """Allocation problem without a feasible solution."""


class NumericalError(LwaError, RuntimeError):
    """A numerical routine flagged a degenerate result."""
