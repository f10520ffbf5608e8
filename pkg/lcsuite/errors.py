"""Exceptions and warning categories raised by `lcsuite`."""


class LcsuiteError(Exception):
    """Base class for every error raised by `lcsuite`."""


class InvalidInputError(LcsuiteError, ValueError):
    """Input data violates a precondition (wrong shape, NaN, out-of-range values...)."""


class SingleClassError(InvalidInputError):
    """Labels contain a single class where both classes are required."""


class DataFormatError(InvalidInputError):
    """A delimited file can't be parsed into the expected table."""


class OutOfBagError(LcsuiteError, RuntimeError):
    """No row is out-of-bag for any tree, so no out-of-bag criterion exists."""


class ConvergenceWarning(UserWarning):
    """An iterative fit stopped before reaching its tolerance."""


class MonotonicityWarning(UserWarning):
    """A fitted recalibration map isn't monotone."""


class DegenerateTreeWarning(UserWarning):
    """Trees couldn't split their root node."""
