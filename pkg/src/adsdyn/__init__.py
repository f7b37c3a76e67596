"""Generalized boundary dynamics for the AdS5 graviton wave equation.

Modules: specfun (Bessel K2 and constants), profiles (resolvent profiles),
fields (grids, cutoff, P2, coordinates, inner products), atlas (boundary
triples and extension parameters), spectrum (negative eigenvalues),
energy (conserved energy), evolve (mode solver), synth (AdS assembly),
cli (command line).
"""
__version__ = "0.1.0"

from .errors import (ClosureError, DomainError, FitError, InadmissibleError, NumericError,
                     UsageError)

__all__ = ["__version__", "ClosureError", "DomainError", "FitError", "InadmissibleError",
           "NumericError", "UsageError"]
