"""Numerical toolkit for reducing second-order quasiconvexity to first order.

Builds explicit first-order quasiconvex extensions of strictly 2-quasiconvex
energies, estimates quasiconvex envelopes over periodic test fields, and
certifies every supporting scalar inequality and Korn-type estimate.
"""

from .kernels import ConstantsTable, ModelParams, constants_for

__all__ = ["ModelParams", "ConstantsTable", "constants_for"]
__version__ = "0.1.0"
