"""Exception types raised by dronemob."""


class DronemobError(Exception):
    """Base class for all package errors."""


class ParameterError(DronemobError, ValueError):
    """A physical or numerical parameter is out of its valid range."""


class ConfigError(DronemobError, ValueError):
    """An experiment or simulation configuration is invalid."""


class NumericalError(DronemobError, ArithmeticError):
    """A quadrature, series or fit failed to reach its tolerance.

    Attributes
    ----------
    residual : float or None
        Best residual (or error estimate) reached before giving up.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
