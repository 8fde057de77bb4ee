"""Exception types raised across the package."""


class MDCodingError(Exception):
    """Base class for all package errors."""


class InvalidOrderError(MDCodingError, ValueError):
    """Context order is negative or too large for the sequence length."""


class InvalidCountsError(MDCodingError, ValueError):
    """A count vector contains negative entries."""


class InvalidInputError(MDCodingError, ValueError):
    """Malformed sequence, position, symbol or parameter."""


class InstanceTooLargeError(MDCodingError, ValueError):
    """Exhaustive search requested on an instance beyond the size guard."""


class DecodeError(MDCodingError):
    """A bitstream or message could not be decoded."""


class FragmentMismatchError(DecodeError):
    """The two refinement fragments do not come from the same encode."""
