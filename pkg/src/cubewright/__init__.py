"""Cube terms, blockers and non-dualizability certificates for finite algebras."""

from .kernel import Budget, FiniteAlgebra, Operation, parse_algebra

__version__ = "0.1.0"

__all__ = ["Budget", "FiniteAlgebra", "Operation", "parse_algebra", "__version__"]
