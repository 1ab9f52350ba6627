"""Exception types shared across the package.

The CLI maps these onto exit codes: config errors -> 2, data errors -> 3,
numerical aborts -> 4.
"""


class GuidedClusterError(Exception):
    """Base class for package-specific failures."""


class ConfigError(GuidedClusterError):
    """Invalid configuration file or hyperparameter combination."""


class DataError(GuidedClusterError):
    """Malformed or unusable input data."""


class NumericalError(GuidedClusterError):
    """Non-finite value encountered where finiteness is guaranteed."""
