"""Anharmonic chains of oscillators driven by two heat baths.

Models, integrators, Lyapunov-function diagnostics, controllability checks,
stationary statistics of linear chains and the Lefevere-Schenkel mode limit.
"""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
