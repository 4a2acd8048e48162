"""Exception types shared across the library."""


class MemcapError(Exception):
    """Base class for all library errors."""


class DimensionError(MemcapError, ValueError):
    """Operand shapes do not conform; the message names both shapes."""


class NumericError(MemcapError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class UsageError(MemcapError, ValueError):
    """An API was called with arguments outside its contract."""


class FormatError(MemcapError, ValueError):
    """A file on disk does not match its declared format."""
