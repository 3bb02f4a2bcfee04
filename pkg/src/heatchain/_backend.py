"""Selects the compiled kernels when available.

Set ``HEATCHAIN_BACKEND=python`` to force the pure-Python path.
"""
import os

BACKEND = "python"
kernels = None

if os.environ.get("HEATCHAIN_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as kernels  # noqa: F401
        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = None
