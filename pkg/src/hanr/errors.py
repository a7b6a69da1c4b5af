"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: config errors -> 2, data errors -> 3,
numeric failures -> 4.
"""


class HanrError(Exception):
    exit_code = 1


class ConfigError(HanrError):
    """Invalid or inconsistent configuration."""
    exit_code = 2


class DataError(HanrError):
    """Bad input data: malformed files, wrong sample rate, NaN samples."""
    exit_code = 3


class NumericError(HanrError):
    """Numerical failure at runtime (NaN loss, divergence)."""
    exit_code = 4
