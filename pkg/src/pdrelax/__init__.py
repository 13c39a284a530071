"""Numerical laboratory for partially dissipative hyperbolic systems and their relaxation limits."""

__version__ = "0.1.0"
