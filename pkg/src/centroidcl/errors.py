"""Exception hierarchy shared by all engine modules.

Every error carries an ``exit_code`` used by the CLI: 2 for configuration
problems, 3 for data/format problems, 4 for numerical failures.
"""


class CentroidCLError(Exception):
    """Base class for all engine errors."""

    exit_code = 1


class ConfigError(CentroidCLError):
    """Invalid configuration or parameter combination."""

    exit_code = 2


class DataError(CentroidCLError):
    """Input data violates an invariant (dimension, finiteness, labels)."""

    exit_code = 3


class FormatError(CentroidCLError):
    """Malformed, truncated, or wrong-version binary file."""

    exit_code = 3


class IoError(CentroidCLError):
    """Underlying I/O failure while reading or writing a file."""

    exit_code = 3


class EmptyModelError(CentroidCLError):
    """Query against a memory store with no matching clusters."""

    exit_code = 3


class NumericsError(CentroidCLError):
    """Non-finite value encountered during numerical optimization."""

    exit_code = 4
