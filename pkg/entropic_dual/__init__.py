"""Entropy-regularized dual solvers for linear and semidefinite programs."""

__version__ = "0.1.0"
