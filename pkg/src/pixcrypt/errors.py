class PixcryptError(Exception):
    """Base class for domain errors raised by this package."""


class FormatError(PixcryptError, ValueError):
    pass


class UnsupportedDepthError(FormatError):
    pass


class LengthError(FormatError):
    pass


class ContainerError(FormatError):
    pass


class ArgumentError(PixcryptError, ValueError):
    pass


class CapacityError(PixcryptError, ValueError):
    pass


class UsageError(PixcryptError, RuntimeError):
    """An API was called out of order, e.g. backward with a stale forward cache."""
