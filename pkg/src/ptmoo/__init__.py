"""Constrained multi-objective Bayesian optimization toolkit."""
from ._core import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
