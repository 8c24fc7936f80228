"""Exception hierarchy. The CLI maps each class to a stable exit code."""


class FlinngError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FlinngError):
    """Invalid configuration or construction parameters (exit code 2)."""


class InputError(FlinngError):
    """Malformed runtime input: points, codes, paths, or arguments (exit code 3)."""


class FormatError(FlinngError):
    """Unreadable or corrupt on-disk artifact (exit code 4)."""


class DomainError(FlinngError):
    """Parameters outside a formula's validity domain (exit code 5)."""


class BoundInvalidError(DomainError):
    """Threshold ratio fell outside the error-bound validity window."""


class DegenerateQueryError(DomainError):
    """Similarity gap collapsed to zero; the stability measure is undefined."""


class InfeasibleParameterError(DomainError):
    """No feasible parameter setting exists under the configured caps."""
