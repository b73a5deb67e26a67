"""Exception types shared across the package."""


class CopulaBoostError(Exception):
    """Base class for package errors."""


class DomainError(CopulaBoostError, ValueError):
    """An argument lies outside the support or parameter space."""


class UndefinedMomentError(CopulaBoostError, ValueError):
    """A requested moment does not exist for the given parameters."""


class InfeasibleDFError(CopulaBoostError, ValueError):
    """The requested degrees of freedom cannot be reached by any smoothing parameter."""


class NumericalError(CopulaBoostError, ArithmeticError):
    """A numerical procedure failed (singular system, non-finite risk, ...)."""


class DataError(CopulaBoostError, ValueError):
    """Input data is malformed or violates the data contract."""


class UndefinedMomentWarning(RuntimeWarning):
    """A score relies on a moment that does not exist for some fitted parameters."""
