"""Exception taxonomy shared across the toolkit.

Argument errors (bad shapes, invalid values) raise plain ValueError; the
classes below carry failure categories that the CLI maps to exit codes.
"""


class TdvmmError(Exception):
    """Base class for toolkit failures."""


class ConfigError(TdvmmError):
    """Config file cannot be parsed or violates an invariant (exit code 2)."""


class DataError(TdvmmError):
    """Missing or malformed input data, e.g. a bad IDX file (exit code 3)."""


class NumericError(TdvmmError):
    """A numerical routine failed to converge or left its domain (exit code 4)."""


class LutRangeError(NumericError):
    """A lookup-table query exceeded the tabulated current range."""


class ExtractionError(NumericError):
    """Weight extraction could not produce a valid solution."""


class CheckFailure(TdvmmError):
    """A built-in acceptance check did not meet its threshold (exit code 5)."""
