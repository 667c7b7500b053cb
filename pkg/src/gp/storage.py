"""
Residual model serialization.

A model file is the concatenation of one record per head (dv, dbeta, dr):

    magic b"NPGP" | version u32 | M u32 | D u32
    lambda f64 | rls noise variance f64
    lengthscales f64 x D | signal variance f64 | noise variance f64
    Z_u f64 x M*D | m_u f64 x M | S_u f64 x M*M

All little-endian, arrays row-major.
"""

import struct
from pathlib import Path
from typing import List, Union

import numpy as np
from loguru import logger

from gp.kernels import KernelHyper
from gp.residual_model import ResidualModel
from gp.sparse_gp import SparseGPHead
from utils.exceptions import DimensionMismatch

MAGIC = b"NPGP"
VERSION = 1
_PREFIX = struct.Struct("<4sIII2d")


def _head_bytes(head: SparseGPHead) -> bytes:
    m, d = head.inducing.shape
    prefix = _PREFIX.pack(MAGIC, VERSION, m, d, head.forgetting_factor, head.rls_noise_variance)
    hyper = np.concatenate(
        [head.hyper.lengthscale_array, [head.hyper.signal_variance, head.hyper.noise_variance]]
    )
    arrays = (hyper, head.inducing, head.mean, head.cov)
    return prefix + b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)


def save_residual_model(model: ResidualModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(_head_bytes(head) for head in model.heads))
    logger.info(f"Saved residual model (M={model.num_inducing}) to {path}")
    return path


def _read_floats(data: bytes, offset: int, count: int):
    end = offset + 8 * count
    if end > len(data):
        raise DimensionMismatch("Truncated residual model file")
    return np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(float), end


def load_residual_model(path: Union[str, Path]) -> ResidualModel:
    """
    Raises:
        DimensionMismatch: Bad magic, version, or truncated content
    """
    data = Path(path).read_bytes()
    heads: List[SparseGPHead] = []
    offset = 0
    while offset < len(data):
        if offset + _PREFIX.size > len(data):
            raise DimensionMismatch("Truncated residual model header")
        magic, version, m, d, lam, rho = _PREFIX.unpack_from(data, offset)
        if magic != MAGIC or version != VERSION:
            raise DimensionMismatch(f"Not a residual model record (magic {magic!r}, v{version})")
        offset += _PREFIX.size
        hyper_vals, offset = _read_floats(data, offset, d + 2)
        inducing, offset = _read_floats(data, offset, m * d)
        mean, offset = _read_floats(data, offset, m)
        cov, offset = _read_floats(data, offset, m * m)
        hyper = KernelHyper(tuple(hyper_vals[:d]), hyper_vals[d], hyper_vals[d + 1])
        heads.append(
            SparseGPHead(
                inducing.reshape(m, d),
                hyper,
                mean=mean,
                cov=cov.reshape(m, m),
                forgetting_factor=lam,
                rls_noise_variance=rho,
            )
        )
    logger.debug(f"Loaded {len(heads)} GP heads from {path}")
    return ResidualModel(heads)
