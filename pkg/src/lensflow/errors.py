"""Exception hierarchy shared by the numerical modules and the command line."""


class LensflowError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(LensflowError, ValueError):
    """Invalid configuration or out-of-range input parameter."""


class DomainError(LensflowError, ValueError):
    """Argument outside the domain where a quantity is defined."""


class DegenerateParametrizationError(LensflowError, ArithmeticError):
    """A metric factor or a coefficient denominator vanished."""


class SingularCouplingError(LensflowError, ArithmeticError):
    """The boundary coupling factor ``1 - cot(theta) * b`` vanished."""


class ChartOutOfRangeError(LensflowError, ArithmeticError):
    """The equilibrium chart could not be evaluated at the requested point."""


class StepError(LensflowError, ArithmeticError):
    """Newton iteration of an implicit step failed to converge."""

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class NumericalError(LensflowError, ArithmeticError):
    """Generic failure of a numerical kernel such as an eigensolver."""
