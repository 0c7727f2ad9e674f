"""Exception types shared across the package."""


class VssprError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(VssprError, ValueError):
    """An argument lies outside its admissible range."""


class ConfigurationError(VssprError, ValueError):
    """Inconsistent sizes or an invalid experiment configuration."""


class NumericError(VssprError, ArithmeticError):
    """Non-finite data or a numerically singular matrix."""
