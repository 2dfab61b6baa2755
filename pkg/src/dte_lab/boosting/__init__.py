"""Gradient boosting core with a compiled/numpy kernel pair."""
from ._backend import backend_name, kernels
from .core import BoostConfig, Forest, fit_forest

__all__ = ["BoostConfig", "Forest", "fit_forest", "backend_name", "kernels"]
