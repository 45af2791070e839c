"""Exception types shared across the package.

The CLI maps these onto exit codes: validation problems exit 2, resource
limits exit 3, anything else exits 1.
"""


class ValidationError(ValueError):
    """Invalid or inconsistent input (bad config, failed precondition)."""


class WindowError(ValidationError):
    """A requested index window falls outside the available data."""


class ShapeError(ValidationError):
    """Mismatched moduli, dimensions, or family sizes."""


class DomainError(ValidationError):
    """Operation not defined for the given system (e.g. inverting a
    non-invertible map)."""


class ConfigError(ValidationError):
    """Unusable numerical configuration (e.g. quadrature grid too coarse)."""


class NumericsError(RuntimeError):
    """A quantity violated a tolerance that separates rounding noise from
    genuine bugs (e.g. a structurally nonnegative average came out far
    below zero)."""


class ResourceError(RuntimeError):
    """Operation exceeds the configured computational budget."""
