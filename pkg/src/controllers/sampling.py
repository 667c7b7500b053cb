"""
Truncated normal control sampling by exact inverse-CDF transform.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtr, ndtri

from controllers.random_streams import uniform_block
from models.config import MPPIConfig


def truncated_normal(mean, std, lower, upper, u) -> np.ndarray:
    """
    Map uniforms u in (0, 1) to N(mean, std^2) truncated to [lower, upper].

    The mean is clamped into the box first. Arguments broadcast.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    std = np.asarray(std, dtype=float)
    mean = np.clip(np.asarray(mean, dtype=float), lower, upper)
    cdf_lo = ndtr((lower - mean) / std)
    cdf_hi = ndtr((upper - mean) / std)
    x = mean + std * ndtri(cdf_lo + u * (cdf_hi - cdf_lo))
    return np.clip(x, lower, upper)


def sample_controls(
    mean_seq: np.ndarray,
    cfg: MPPIConfig,
    bounds: Tuple[np.ndarray, np.ndarray],
    step: int = 0,
    sample_ids: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """
    Draw control sequences around mean_seq.

    Each entry is independent with per-step mean mean_seq[t] and per-component
    std cfg.sigma, truncated to the input box. Draws depend only on
    (cfg.seed, step, sample index), so any subset of samples can be generated
    separately.

    Args:
        mean_seq: (H, 2) nominal sequence, clamped into the box if outside
        cfg: Sampling configuration (seed, sigma, samples)
        bounds: (lower, upper) input box over (a, v_delta)
        step: Control step index used to key the random stream
        sample_ids: Subset of sample indices; defaults to range(cfg.samples)

    Returns:
        (len(sample_ids), H, 2) samples
    """
    mean_seq = np.asarray(mean_seq, dtype=float)
    if sample_ids is None:
        sample_ids = np.arange(cfg.samples)
    u = uniform_block(cfg.seed, step, sample_ids, mean_seq.shape)
    lower, upper = bounds
    return truncated_normal(mean_seq[None], np.asarray(cfg.sigma), lower, upper, u)
