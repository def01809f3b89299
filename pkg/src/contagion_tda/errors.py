class ContagionError(Exception):
    """Base class for package errors."""


class ConfigError(ContagionError, ValueError):
    """Invalid configuration or parameter value."""


class InputError(ContagionError, ValueError):
    """Malformed or inconsistent input data."""


class FitError(ContagionError, RuntimeError):
    """A model could not be fitted to the supplied data."""
