"""Exception types raised by :mod:`ffia`."""


class FfiaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(FfiaError, ValueError):
    pass


class DomainError(FfiaError, ValueError):
    """An argument lies outside the region where a series is valid."""


class SingularKernelError(FfiaError, ZeroDivisionError):
    """The kernel was evaluated at (or within ``TAU_SING`` of) its pole."""


class DegenerateConfigurationError(FfiaError, ValueError):
    """Two sample points are too close for the inverse coefficients to exist."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class TranslationError(FfiaError, RuntimeError):
    """An M2L translation was requested between boxes that are not well separated."""
