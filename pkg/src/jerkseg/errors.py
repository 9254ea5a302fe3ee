"""Exception hierarchy shared by all jerkseg modules."""


class JerkSegError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(JerkSegError, ValueError):
    """Input violates a documented invariant."""


class NonPositiveParameter(ValidationError):
    pass


class NotUnderdamped(ValidationError):
    pass


class GridTooLarge(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class NumericalError(JerkSegError, ArithmeticError):
    """A numerical sub-problem could not be solved."""


class NoZero(NumericalError):
    pass


class NotBracketed(NumericalError):
    pass


class DegenerateVector(NumericalError):
    pass


class FitDiverged(NumericalError):
    pass


class NoFeasible(NumericalError):
    pass


class NeverMultiple(NumericalError):
    pass


class PlanningFailed(JerkSegError):
    """The line search found no consistent terminal angle."""


class UnsupportedStructure(JerkSegError):
    """Requested switching structure is outside the handled (nu=0, even n) family."""
