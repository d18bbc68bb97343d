"""Exception types shared across the package."""


class LiqfuelError(Exception):
    """Base class for all package errors."""


class DomainError(LiqfuelError, ValueError):
    """An argument lies outside the domain on which an operation is defined."""


class NumericError(LiqfuelError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    ``residual`` carries the achieved accuracy estimate when one is known.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RootNotFoundError(NumericError):
    """No sign change was found in the scanned window."""


class InconsistencyError(LiqfuelError):
    """Numerical evidence contradicts a property that should hold."""


class AssumptionError(LiqfuelError):
    """A parameter set fails the model assumptions.

    ``report`` is the :class:`~liqfuel.model.AssumptionReport` that failed.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
