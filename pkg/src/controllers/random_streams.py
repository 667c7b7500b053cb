"""
Counter-based random streams.

Every uniform draw is a pure function of (seed, step, sample, t, component),
obtained by hashing a counter with splitmix64. Samples can therefore be
generated in any order or chunking and still reproduce bit for bit.
"""

from typing import Sequence

import numpy as np

# Increment, multipliers and shifts of SplitMix64 (Steele, Lea and Flood,
# "Fast Splittable Pseudorandom Number Generators", OOPSLA 2014), as in the
# public-domain splitmix64.c by Sebastiano Vigna.
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_INV_2_53 = 2.0**-53


def splitmix64(x) -> np.ndarray:
    """splitmix64 finalizer applied elementwise to uint64 values (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        return z ^ (z >> _S31)


def stream_key(seed: int, step: int) -> np.uint64:
    """Key of the stream used at one control step."""
    mask = (1 << 64) - 1
    seed_hash = splitmix64(np.uint64(int(seed) & mask))
    return splitmix64(seed_hash ^ np.uint64(int(step) & mask))


def uniform_block(
    seed: int, step: int, samples: Sequence[int], shape: Sequence[int]
) -> np.ndarray:
    """
    Uniforms in the open interval (0, 1) for the given sample indices.

    Args:
        seed: Controller seed
        step: Control step index
        samples: Global sample indices (any subset, any order)
        shape: Per-sample block shape, e.g. (H, 2)

    Returns:
        Array of shape (len(samples), *shape)
    """
    samples = np.asarray(samples, dtype=np.uint64).reshape(-1)
    shape = tuple(int(s) for s in shape)
    per_sample = np.uint64(int(np.prod(shape)) if shape else 1)
    offsets = np.arange(int(per_sample), dtype=np.uint64)
    with np.errstate(over="ignore"):
        counters = samples[:, None] * per_sample + offsets[None, :]
    h = splitmix64(splitmix64(counters) ^ stream_key(seed, step))
    u = ((h >> _S11).astype(np.float64) + 0.5) * _INV_2_53
    return u.reshape((len(samples),) + shape)
