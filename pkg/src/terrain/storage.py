"""
Terrain file I/O.

Binary grid container layout (little-endian):

    offset  size  field
    0       4     magic b"NPTG"
    4       4     version (u32)
    8       16    origin x, y (f64)
    24      16    spacing x, y (f64)
    40      8     dims nx, ny (u32)
    48      16    zero padding
    64      ...   height, n_x, n_y, n_z as nx*ny f64 each, row-major [i, j]

Slope and orientation are recomputed on load. Point clouds are plain text
rows "x y z nx ny nz" with '#' comments.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np
from loguru import logger

from terrain.grid import TerrainGrid
from utils.exceptions import InvalidBounds, NonFiniteInput

MAGIC = b"NPTG"
VERSION = 1
HEADER_SIZE = 64
_HEADER = struct.Struct("<4sI2d2d2I")


def save_grid(grid: TerrainGrid, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nx, ny = grid.dims
    header = _HEADER.pack(MAGIC, VERSION, *grid.origin, *grid.spacing, nx, ny)
    header = header.ljust(HEADER_SIZE, b"\0")
    with open(path, "wb") as f:
        f.write(header)
        for values in (grid.height, *np.moveaxis(grid.normal, -1, 0)):
            f.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    logger.debug(f"Saved terrain grid {grid.dims} to {path}")
    return path


def load_grid(path: Union[str, Path]) -> TerrainGrid:
    """
    Read a grid written by save_grid.

    Raises:
        InvalidBounds: Bad magic, unsupported version or truncated payload
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < HEADER_SIZE:
        raise InvalidBounds(f"{path} is too short to be a terrain grid")
    magic, version, ox, oy, sx, sy, nx, ny = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise InvalidBounds(f"{path} is not a terrain grid (magic {magic!r})")
    if version != VERSION:
        raise InvalidBounds(f"Unsupported terrain grid version {version}")

    count = nx * ny
    expected = HEADER_SIZE + 4 * count * 8
    if len(data) != expected:
        raise InvalidBounds(f"{path}: expected {expected} bytes, found {len(data)}")
    body = np.frombuffer(data, dtype="<f8", offset=HEADER_SIZE).reshape(4, nx, ny)
    height = body[0].astype(float)
    normal = np.stack([body[1], body[2], body[3]], axis=-1).astype(float)
    grid = TerrainGrid.from_fields((ox, oy), (sx, sy), height, normal)
    logger.debug(f"Loaded terrain grid {grid.dims} from {path}")
    return grid


def load_point_cloud(path: Union[str, Path]) -> np.ndarray:
    """Load an (N, 6) oriented point cloud from text."""
    try:
        arr = np.loadtxt(path, comments="#", ndmin=2, dtype=float)
    except ValueError as e:
        raise NonFiniteInput(f"Cannot parse point cloud {path}: {e}") from e
    if arr.size == 0:
        return np.zeros((0, 6))
    if arr.shape[1] != 6:
        raise NonFiniteInput(f"Point cloud rows need 6 columns, found {arr.shape[1]}")
    return arr


def save_point_cloud(points: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(points, dtype=float), fmt="%.17g", header="x y z nx ny nz")
    return path
