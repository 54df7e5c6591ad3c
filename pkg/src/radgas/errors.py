"""Exception hierarchy shared by all radgas modules."""


class RadgasError(Exception):
    """Base class for every error raised by this package."""


class GridError(RadgasError, ValueError):
    """Invalid grid parameters or a field that does not match its grid."""


class SymmetryError(RadgasError, ValueError):
    """Spectral coefficients that do not represent a real field."""


class RegimeError(RadgasError):
    """The solution left the small-data regime (blow-up trigger fired).

    ``time`` and ``amplitude`` record where it happened, when known.
    """

    def __init__(self, message, time=None, amplitude=None):
        super().__init__(message)
        self.time = time
        self.amplitude = amplitude


class NumericalError(RadgasError, ArithmeticError):
    """Non-finite values produced during a computation."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class FitError(RadgasError, ValueError):
    """A decay fit could not be performed on the given series."""


class ConfigError(RadgasError, ValueError):
    """Experiment configuration failed validation."""


class FieldFormatError(RadgasError, ValueError):
    """A field dump has the wrong magic, version or shape."""
