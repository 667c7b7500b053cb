"""Sparse Gaussian process residual learning."""

from gp.kernels import KernelHyper, kernel, kernel_matrix
from gp.residual_model import ResidualModel, residual_target
from gp.sparse_gp import SparseGPHead, batch_fit

__all__ = [
    "KernelHyper",
    "ResidualModel",
    "SparseGPHead",
    "batch_fit",
    "kernel",
    "kernel_matrix",
    "residual_target",
]
