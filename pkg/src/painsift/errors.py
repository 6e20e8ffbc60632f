"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
anything else -> 3.
"""


class PainsiftError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(PainsiftError):
    """Invalid configuration or CLI usage."""


class DataError(PainsiftError):
    """Invalid input data: parse failures, bad labels, contract violations."""
