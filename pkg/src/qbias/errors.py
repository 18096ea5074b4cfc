"""Exception types shared across the package.

Each class also derives from the closest builtin so callers that only know
about ``ValueError``/``IndexError`` still catch them.
"""


class QBiasError(Exception):
    """Base class for all package errors."""


class CapacityError(QBiasError, ValueError):
    """Requested register or workload exceeds the supported size."""


class QubitIndexError(QBiasError, IndexError):
    """Qubit index outside the register, or a malformed two-qubit gate."""


class ArityError(QBiasError, ValueError):
    """Length mismatch between related inputs."""


class RangeError(QBiasError, ValueError):
    """Invalid numeric range, e.g. ``hi <= lo``."""


class DomainError(QBiasError, ValueError):
    """Argument outside a function's mathematical domain."""


class UnsupportedGateError(QBiasError, TypeError):
    """Gate kind cannot be used for the requested operation."""


class ConvergenceError(QBiasError, RuntimeError):
    """Iterative method did not converge within its budget."""


class DataError(QBiasError, ValueError):
    """Bad or insufficient input data."""


class FormatError(DataError):
    """File does not follow the expected binary layout."""


class LengthError(DataError):
    """Payload shorter or longer than its header declares."""


class ConfigError(QBiasError, ValueError):
    """Invalid experiment configuration."""
