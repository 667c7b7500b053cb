"""
ARD squared-exponential kernel.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from utils.exceptions import DimensionMismatch, LearningError

JITTER = 1e-8


@dataclass(frozen=True)
class KernelHyper:
    """Per-dimension lengthscales, signal variance and noise variance."""

    lengthscales: Tuple[float, ...]
    signal_variance: float
    noise_variance: float

    def __post_init__(self):
        object.__setattr__(self, "lengthscales", tuple(float(v) for v in self.lengthscales))
        values = self.lengthscales + (self.signal_variance, self.noise_variance)
        if not self.lengthscales:
            raise DimensionMismatch("At least one lengthscale is required")
        if not all(np.isfinite(v) and v > 0 for v in values):
            raise LearningError(f"Kernel hyperparameters must be positive and finite: {values}")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    @property
    def lengthscale_array(self) -> np.ndarray:
        return np.asarray(self.lengthscales, dtype=float)

    def replace(self, **changes) -> "KernelHyper":
        data = {
            "lengthscales": self.lengthscales,
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
        }
        data.update(changes)
        return KernelHyper(**data)


def _check_dim(points: np.ndarray, hyper: KernelHyper) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != hyper.dim:
        raise DimensionMismatch(
            f"Kernel inputs have {pts.shape[-1]} columns, hyperparameters {hyper.dim}"
        )
    return pts


def correlation_matrix(
    a: np.ndarray, b: np.ndarray, lengthscales: Sequence[float]
) -> np.ndarray:
    """exp(-0.5 * squared scaled distance) between the rows of a and b."""
    ell = np.asarray(lengthscales, dtype=float)
    d2 = cdist(np.atleast_2d(a) / ell, np.atleast_2d(b) / ell, "sqeuclidean")
    return np.exp(-0.5 * d2)


def kernel_matrix(a, b, hyper: KernelHyper) -> np.ndarray:
    a = _check_dim(a, hyper)
    b = _check_dim(b, hyper)
    return hyper.signal_variance * correlation_matrix(a, b, hyper.lengthscales)


def kernel(z1, z2, hyper: KernelHyper) -> float:
    """sigma_f^2 * exp(-0.5 * sum(((z1 - z2) / l)^2))"""
    diff = (np.asarray(z1, dtype=float) - np.asarray(z2, dtype=float)) / hyper.lengthscale_array
    return float(hyper.signal_variance * np.exp(-0.5 * np.dot(diff, diff)))
