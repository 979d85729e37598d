"""Exception types shared across the package.

Each maps to one CLI exit code; library callers can catch them directly.
"""


class CshazardError(Exception):
    """Base class for package errors."""

    exit_code = 1


class SchemaError(CshazardError):
    """Malformed or unparseable input (exit 2)."""

    exit_code = 2


class EmptyResultError(CshazardError):
    """A pipeline stage produced no rows (exit 3)."""

    exit_code = 3


class UnknownKeyError(CshazardError):
    """A requested band, cause, or preset does not exist (exit 4)."""

    exit_code = 4


class IncompatibleInputsError(CshazardError):
    """Inputs that cannot be combined, e.g. mismatched age grids (exit 5)."""

    exit_code = 5


class NumericalError(CshazardError):
    """A numerical routine failed to converge or lost its bracket (exit 6)."""

    exit_code = 6
