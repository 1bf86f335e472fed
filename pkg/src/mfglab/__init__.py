"""Solvers for finite-horizon and ergodic mean field games: baseline and
turnpike-accelerated deep Galerkin training, a finite-difference reference
solver, and a linear-quadratic analytic oracle."""

__version__ = "0.1.0"

from .models import LocalCouplingModel, LQModel
