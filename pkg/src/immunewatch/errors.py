"""Exception types shared across the package."""


class ImmuneWatchError(Exception):
    """Base class for all package errors."""


class ConfigError(ImmuneWatchError):
    """Invalid configuration: bad parameter ranges, mismatched lengths."""


class DataError(ImmuneWatchError):
    """Malformed input data: unparseable log lines, out-of-order records."""


class ContractViolation(ImmuneWatchError):
    """An operation was called outside its stated precondition."""
