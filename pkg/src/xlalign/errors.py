"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1 (argparse),
anything raised from data handling exits 2.
"""


class AlignerError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(AlignerError):
    """Malformed or unreadable container, checkpoint, or manifest data."""


class DataError(AlignerError):
    """Inputs are readable but violate a contract (dims, invariants, config)."""
