"""Exception types shared across the package.

Exit-code mapping for the CLI: usage errors -> 1, DataError -> 2,
NumericError -> 3.
"""


class StorygraphError(Exception):
    """Base class for errors raised by this package."""


class DataError(StorygraphError):
    """Malformed or contract-violating input data (files, labels, schemas)."""


class NumericError(StorygraphError):
    """Non-finite values or numerically impossible requests."""
