"""Gated residual accelerated-failure-time models trained with a soft-rank loss."""

from graft.kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
