"""Exception types shared across the package."""


class ShiftoptError(Exception):
    """Base class for package-specific errors."""


class DomainError(ShiftoptError, ValueError):
    """A point lies outside the decision domain [0, 1]."""


class ValidationError(ShiftoptError, ValueError):
    """A function, stream, or configuration fails structural validation."""


class ParameterError(ShiftoptError, ValueError):
    """A numeric parameter is outside its admissible range."""


class BudgetError(ShiftoptError, RuntimeError):
    """An exact offline computation would exceed its resource budget."""


class NumericalDriftError(ShiftoptError, ArithmeticError):
    """Accumulated floating-point drift exceeded a hard sanity threshold."""
