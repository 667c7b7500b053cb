"""
Terrain Grid

Regular planar grid of height, unit normal, slope and orientation fields with
bilinear queries, plus conversion of normals to the roll/pitch angles of the
local tangent frame.
"""

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator
from scipy.spatial import QhullError

from utils.diagnostics import log_event
from utils.exceptions import (
    DegenerateCloud,
    InvalidBounds,
    NonFiniteInput,
    NonUnitNormal,
    OutOfBounds,
)

DEFAULT_SPACING = 0.25
BOUNDS_TOLERANCE = 1e-9
UNIT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class OrientedPoint:
    """Surface sample with its unit normal (n_z >= 0 after ingestion)."""

    position: Tuple[float, float, float]
    normal: Tuple[float, float, float]


@dataclass(frozen=True)
class RollPitch:
    """Roll alpha and pitch gamma of the tangent frame (floats or arrays)."""

    alpha: Union[float, np.ndarray]
    gamma: Union[float, np.ndarray]


def orient_normals(normal: np.ndarray) -> np.ndarray:
    """Normalize normals, flip those pointing down, and clear negative zeros."""
    normal = np.asarray(normal, dtype=float)
    norm = np.linalg.norm(normal, axis=-1, keepdims=True)
    if np.any(norm <= 0.0):
        raise NonFiniteInput("Zero-length normal vector")
    unit = normal / norm
    unit = np.where(unit[..., 2:3] < 0.0, -unit, unit)
    return unit + 0.0


def slope_orientation(normal: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Slope theta = arccos(|n_z|) and orientation phi = atan2(n_y, n_x).

    atan2(0, 0) is taken as 0 on flat cells; the +0.0 clears negative zeros so
    phi stays in (-pi, pi].
    """
    normal = np.asarray(normal, dtype=float)
    slope = np.arccos(np.clip(np.abs(normal[..., 2]), 0.0, 1.0))
    orientation = np.arctan2(normal[..., 1] + 0.0, normal[..., 0] + 0.0)
    return slope, orientation


@dataclass(frozen=True)
class TerrainGrid:
    """
    Immutable terrain fields on nodes (x_i, y_j) = origin + (i, j) * spacing.

    Arrays are indexed [i, j] with i along x. `extrapolated` marks nodes that
    were filled outside the convex hull of the source points.
    """

    origin: np.ndarray
    spacing: np.ndarray
    height: np.ndarray
    normal: np.ndarray
    slope: np.ndarray = field(repr=False)
    orientation: np.ndarray = field(repr=False)
    extrapolated: np.ndarray = field(repr=False)

    @classmethod
    def from_fields(
        cls,
        origin: Sequence[float],
        spacing: Sequence[float],
        height: np.ndarray,
        normal: np.ndarray,
        extrapolated: Optional[np.ndarray] = None,
    ) -> "TerrainGrid":
        """Build a grid from height and normal arrays, deriving slope and orientation."""
        origin = np.asarray(origin, dtype=float).reshape(2)
        spacing = np.asarray(spacing, dtype=float).reshape(2)
        height = np.asarray(height, dtype=float)
        normal = np.asarray(normal, dtype=float)

        if np.any(spacing <= 0) or not np.all(np.isfinite(spacing)):
            raise InvalidBounds(f"Grid spacing must be positive, got {spacing}")
        if height.ndim != 2 or min(height.shape) < 2:
            raise InvalidBounds(f"Grid needs at least 2x2 nodes, got {height.shape}")
        if normal.shape != height.shape + (3,):
            raise InvalidBounds("Normal array must match height dims with 3 components")
        if not (np.all(np.isfinite(height)) and np.all(np.isfinite(normal))):
            raise NonFiniteInput("Terrain fields contain non-finite entries")
        if not np.all(np.isfinite(origin)):
            raise NonFiniteInput("Grid origin must be finite")

        normal = orient_normals(normal)
        slope, orientation = slope_orientation(normal)
        if extrapolated is None:
            extrapolated = np.zeros(height.shape, dtype=bool)
        else:
            extrapolated = np.asarray(extrapolated, dtype=bool).reshape(height.shape)

        arrays = [origin, spacing, height, normal, slope, orientation, extrapolated]
        for arr in arrays:
            arr.setflags(write=False)
        return cls(*arrays)

    @property
    def dims(self) -> Tuple[int, int]:
        return int(self.height.shape[0]), int(self.height.shape[1])

    @property
    def upper(self) -> np.ndarray:
        return self.origin + (np.asarray(self.dims) - 1) * self.spacing

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max)"""
        up = self.upper
        return float(self.origin[0]), float(up[0]), float(self.origin[1]), float(up[1])

    def node_coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = self.origin[0] + np.arange(self.dims[0]) * self.spacing[0]
        ys = self.origin[1] + np.arange(self.dims[1]) * self.spacing[1]
        return xs, ys

    def contains(self, points: np.ndarray, tolerance: float = BOUNDS_TOLERANCE) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        lo = self.origin - tolerance
        hi = self.upper + tolerance
        return np.all((pts[..., :2] >= lo) & (pts[..., :2] <= hi), axis=-1)

    def _cells(self, points: np.ndarray):
        pts = np.asarray(points, dtype=float)
        nx, ny = self.dims
        fx = np.clip((pts[..., 0] - self.origin[0]) / self.spacing[0], 0.0, nx - 1.0)
        fy = np.clip((pts[..., 1] - self.origin[1]) / self.spacing[1], 0.0, ny - 1.0)
        i = np.minimum(np.floor(fx).astype(np.intp), nx - 2)
        j = np.minimum(np.floor(fy).astype(np.intp), ny - 2)
        return i, j, fx - i, fy - j

    def _bilinear(self, values: np.ndarray, i, j, tx, ty) -> np.ndarray:
        if values.ndim == 3:
            tx = tx[..., None]
            ty = ty[..., None]
        return (
            (1.0 - tx) * (1.0 - ty) * values[i, j]
            + tx * (1.0 - ty) * values[i + 1, j]
            + (1.0 - tx) * ty * values[i, j + 1]
            + tx * ty * values[i + 1, j + 1]
        )

    def interpolate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Bilinear height and renormalized normal at planar points, without raising.

        Points outside the grid are evaluated at the clamped position and flagged
        False in the returned inside mask.

        Returns:
            (height, normal, inside)
        """
        pts = np.asarray(points, dtype=float)
        inside = self.contains(pts)
        i, j, tx, ty = self._cells(pts)
        height = self._bilinear(self.height, i, j, tx, ty)
        normal = self._bilinear(self.normal, i, j, tx, ty)
        norm = np.linalg.norm(normal, axis=-1, keepdims=True)
        normal = normal / np.maximum(norm, np.finfo(float).tiny)

        if self.extrapolated.any():
            ex = self.extrapolated
            fringe = ex[i, j] | ex[i + 1, j] | ex[i, j + 1] | ex[i + 1, j + 1]
            hits = int(np.count_nonzero(fringe & inside))
            if hits:
                log_event("terrain_fringe_query", count=hits)
        return height, normal, inside

    def query(self, points: np.ndarray):
        return query_fields(self, points)


def query_fields(grid: TerrainGrid, p: np.ndarray):
    """
    Query (h, n, theta, phi) at planar position(s) p.

    theta and phi are recomputed from the interpolated normal, not interpolated
    from the stored angle arrays.

    Raises:
        OutOfBounds: Any query point lies outside the grid bounding box
    """
    pts = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(pts)):
        raise NonFiniteInput("Query position is not finite")
    height, normal, inside = grid.interpolate(pts)
    if not np.all(inside):
        raise OutOfBounds(
            f"Query outside terrain bounds {grid.bounds}",
            context={"points": pts[~inside].tolist() if pts.ndim > 1 else pts.tolist()},
        )
    slope, orientation = slope_orientation(normal)
    if pts.ndim == 1:
        return float(height), normal, float(slope), float(orientation)
    return height, normal, slope, orientation


def roll_pitch_from_normal(n: np.ndarray) -> RollPitch:
    """
    Roll and pitch of the tangent frame from an upward unit normal.

    alpha = atan2(n_y, n_z), gamma = atan2(-n_x, sqrt(n_y^2 + n_z^2)).

    Raises:
        NonUnitNormal: Norm off by more than 1e-6 or normal pointing downwards
    """
    n = np.asarray(n, dtype=float)
    norm = np.linalg.norm(n, axis=-1)
    if np.any(np.abs(norm - 1.0) > UNIT_TOLERANCE):
        raise NonUnitNormal(f"Normal must be unit length, got norm {norm}")
    if np.any(n[..., 2] < 0.0):
        raise NonUnitNormal("Normal must satisfy n_z >= 0")
    alpha = np.arctan2(n[..., 1], n[..., 2])
    gamma = np.arctan2(-n[..., 0], np.hypot(n[..., 1], n[..., 2]))
    if n.ndim == 1:
        return RollPitch(float(alpha), float(gamma))
    return RollPitch(alpha, gamma)


def normal_from_roll_pitch(alpha, gamma) -> np.ndarray:
    """Inverse of roll_pitch_from_normal: R_x(-alpha) R_y(-gamma) e_z."""
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    return np.stack(
        [-np.sin(gamma), np.sin(alpha) * np.cos(gamma), np.cos(alpha) * np.cos(gamma)],
        axis=-1,
    )


def roll_pitch_at(grid: TerrainGrid, points: np.ndarray) -> Tuple[RollPitch, np.ndarray]:
    """Roll/pitch at planar points plus the inside mask; never raises for bounds."""
    _, normal, inside = grid.interpolate(points)
    alpha = np.arctan2(normal[..., 1], normal[..., 2])
    gamma = np.arctan2(-normal[..., 0], np.hypot(normal[..., 1], normal[..., 2]))
    return RollPitch(alpha, gamma), inside


def _as_point_arrays(points) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 6:
            raise NonFiniteInput("Point array must have shape (N, 6)")
        return arr[:, :3], arr[:, 3:]
    pts: Iterable[OrientedPoint] = points
    positions = np.array([p.position for p in pts], dtype=float).reshape(-1, 3)
    normals = np.array([p.normal for p in pts], dtype=float).reshape(-1, 3)
    return positions, normals


def build_grid_from_points(
    points, spacing: Union[float, Sequence[float]] = DEFAULT_SPACING
) -> TerrainGrid:
    """
    Interpolate an oriented point cloud onto a regular grid.

    Height and normal components are interpolated linearly over a Delaunay
    triangulation of the planar positions. Nodes outside the convex hull take
    the value of the nearest input point and are flagged as extrapolated.

    Args:
        points: Sequence of OrientedPoint or an (N, 6) array "x y z nx ny nz"
        spacing: Target node spacing; adjusted so nodes span the bounding box

    Raises:
        DegenerateCloud: Fewer than 3 points or all collinear in plan view
        NonFiniteInput: NaN/inf coordinates or normals
    """
    positions, normals = _as_point_arrays(points)
    if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(normals))):
        raise NonFiniteInput("Point cloud contains non-finite values")
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (2,))
    if np.any(spacing <= 0):
        raise InvalidBounds(f"Grid spacing must be positive, got {spacing}")

    xy = positions[:, :2]
    if len(xy) < 3 or np.linalg.matrix_rank(xy - xy.mean(axis=0)) < 2:
        raise DegenerateCloud("Need at least 3 non-collinear planar positions")
    normals = orient_normals(normals)

    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    extent = hi - lo
    dims = np.maximum(np.round(extent / spacing).astype(int) + 1, 2)
    step = extent / (dims - 1)

    xs = lo[0] + np.arange(dims[0]) * step[0]
    ys = lo[1] + np.arange(dims[1]) * step[1]
    xs[-1], ys[-1] = hi[0], hi[1]
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    values = np.column_stack([positions[:, 2], normals])
    try:
        linear = LinearNDInterpolator(xy, values)
    except QhullError as e:
        raise DegenerateCloud(f"Triangulation failed: {e}") from e
    fields = linear(nodes)
    outside = np.isnan(fields).any(axis=1)
    if outside.any():
        nearest = NearestNDInterpolator(xy, values)
        fields[outside] = nearest(nodes[outside])
        logger.debug(f"{int(outside.sum())} grid nodes filled outside the convex hull")

    shape = (int(dims[0]), int(dims[1]))
    height = fields[:, 0].reshape(shape)
    normal = fields[:, 1:].reshape(shape + (3,))
    grid = TerrainGrid.from_fields(lo, step, height, normal, outside.reshape(shape))
    logger.info(f"Built terrain grid {shape} from {len(xy)} points, spacing {step}")
    return grid
