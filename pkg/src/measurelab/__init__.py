"""Finite-difference experiments for semilinear Dirichlet problems with measure data."""

from .core import (
    Atom,
    Check,
    DiscreteMeasure,
    Domain,
    GridFunction,
    Nonlinearity,
    arctan,
    exponential,
    linear,
    polynomial,
    zero,
)

__all__ = [
    "Atom",
    "Check",
    "DiscreteMeasure",
    "Domain",
    "GridFunction",
    "Nonlinearity",
    "arctan",
    "exponential",
    "linear",
    "polynomial",
    "zero",
]
