"""Exception types shared across the package.

The CLI maps ``UsageError`` to exit code 2 and ``NumericError`` (and its
subclasses) to exit code 3.
"""


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class UsageError(ValueError):
    """Caller violated a precondition (shapes, windows, options)."""


class NumericError(RuntimeError):
    """A numerical procedure failed (singular system, no root, ...)."""


class FitError(NumericError):
    """Least-squares extraction was ill-conditioned."""


class ClosureError(NumericError):
    """The boundary closure of the evolution could not be solved."""


class InadmissibleError(NumericError):
    """No self-adjoint realization exists for the requested boundary triple."""
