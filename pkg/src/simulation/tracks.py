"""
Track Generation

Closed centerlines for the kidney, L-shaped and oval tracks, a curvature
capped speed profile, and the paired terrain grid from the analytic catalog.
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np
from loguru import logger

from controllers.reference import ReferenceTrajectory
from dynamics.single_track import GRAVITY
from models.config import TrackConfig, VehicleParams
from terrain.catalog import build_grid_from_catalog
from terrain.grid import TerrainGrid
from terrain.statistics import map_statistics
from utils.exceptions import UnknownShape

OVAL_RADIUS = 10.0
OVAL_STRAIGHT = 20.0
KIDNEY_RADIUS = 12.0
L_SHAPE_OUTLINE = np.array(
    [[0.0, 0.0], [36.0, 0.0], [36.0, 14.0], [14.0, 14.0], [14.0, 30.0], [0.0, 30.0]]
)
CHAIKIN_ITERATIONS = 5
CORNER_CUT = 0.25


@dataclass
class GeneratedTrack:
    reference: ReferenceTrajectory
    grid: TerrainGrid
    statistics: Dict[str, float]


def resample_closed(points: np.ndarray, spacing: float) -> np.ndarray:
    """Resample a closed polyline uniformly by arc length; last point equals first."""
    pts = np.asarray(points, dtype=float)
    if not np.array_equal(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[:1]])
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    count = max(int(np.ceil(s[-1] / spacing)), 8)
    s_new = np.linspace(0.0, s[-1], count + 1)
    out = np.column_stack([np.interp(s_new, s, pts[:, 0]), np.interp(s_new, s, pts[:, 1])])
    out[-1] = out[0]
    return out


def _oval(scale: float) -> np.ndarray:
    radius = OVAL_RADIUS * scale
    straight = OVAL_STRAIGHT * scale
    half = 0.5 * straight
    arc = np.linspace(-0.5 * np.pi, 0.5 * np.pi, 181)
    right = np.column_stack([half + radius * np.cos(arc), radius * np.sin(arc)])
    left = np.column_stack([-half - radius * np.cos(arc), -radius * np.sin(arc)])
    # counter-clockwise, starting mid bottom straight
    return np.vstack([[[0.0, -radius]], right, left, [[0.0, -radius]]])


def _kidney(scale: float) -> np.ndarray:
    phi = np.linspace(0.0, 2.0 * np.pi, 721)
    r = KIDNEY_RADIUS * scale * (0.8 + 0.3 * np.cos(phi) - 0.15 * np.cos(2.0 * phi))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def _chaikin(points: np.ndarray, iterations: int) -> np.ndarray:
    """Corner cutting on a closed polygon given without the repeated endpoint."""
    pts = points
    for _ in range(iterations):
        nxt = np.roll(pts, -1, axis=0)
        q = (1.0 - CORNER_CUT) * pts + CORNER_CUT * nxt
        r = CORNER_CUT * pts + (1.0 - CORNER_CUT) * nxt
        pts = np.empty((2 * len(q), 2))
        pts[0::2] = q
        pts[1::2] = r
    return pts


def _l_shape(scale: float) -> np.ndarray:
    outline = L_SHAPE_OUTLINE * scale
    outline = outline - outline.mean(axis=0)
    return _chaikin(outline, CHAIKIN_ITERATIONS)


_SHAPES = {"oval": _oval, "kidney": _kidney, "l_shape": _l_shape}


def centerline(shape: str, scale: float = 1.0, spacing: float = 0.1) -> np.ndarray:
    """
    Closed centerline polyline, counter-clockwise, first point repeated last.

    Raises:
        UnknownShape: shape not in kidney, l_shape, oval
    """
    if shape not in _SHAPES:
        raise UnknownShape(f"Unknown track shape '{shape}', valid: {sorted(_SHAPES)}")
    if not scale > 0:
        raise ValueError(f"Track scale must be positive, got {scale}")
    return resample_closed(_SHAPES[shape](scale), spacing)


def curvature(points: np.ndarray) -> np.ndarray:
    """Unsigned curvature at each vertex of a closed polyline (last == first)."""
    ring = points[:-1]
    prev = np.roll(ring, 1, axis=0)
    nxt = np.roll(ring, -1, axis=0)
    a = np.hypot(*(ring - prev).T)
    b = np.hypot(*(nxt - ring).T)
    c = np.hypot(*(nxt - prev).T)
    cross = (ring - prev)[:, 0] * (nxt - ring)[:, 1] - (ring - prev)[:, 1] * (nxt - ring)[:, 0]
    denom = a * b * c
    kappa = np.where(denom > 0, 2.0 * np.abs(cross) / np.where(denom > 0, denom, 1.0), 0.0)
    return np.append(kappa, kappa[0])


def speed_profile(
    points: np.ndarray, max_speed: float, friction: float, lateral_factor: float = 0.6
) -> np.ndarray:
    """v <= min(max_speed, sqrt(lateral_factor * mu * g / kappa))."""
    kappa = curvature(points)
    limit = np.sqrt(lateral_factor * friction * GRAVITY / np.maximum(kappa, 1e-9))
    return np.minimum(max_speed, limit)


def default_profile_params(shape: str, profile: str, scale: float) -> Dict[str, float]:
    """Catalog parameters that line a banked ring up with the oval geometry."""
    if profile == "banked_ring" and shape == "oval":
        return {"radius": OVAL_RADIUS * scale, "straight_length": OVAL_STRAIGHT * scale}
    if profile == "banked_ring":
        return {"radius": KIDNEY_RADIUS * scale}
    return {}


def generate_track(
    shape: str,
    scale: float,
    profile: str,
    params: VehicleParams,
    cfg: Optional[TrackConfig] = None,
    profile_params: Optional[Mapping[str, float]] = None,
) -> GeneratedTrack:
    """
    Build the reference trajectory and its terrain grid.

    The grid covers the centerline bounding box plus cfg.margin on each side.

    Raises:
        UnknownShape: Unknown track shape
        UnknownProfile: Unknown terrain profile or parameter
    """
    cfg = cfg or TrackConfig()
    points = centerline(shape, scale, cfg.point_spacing)
    speeds = speed_profile(points, cfg.max_speed, params.friction, cfg.lateral_accel_factor)
    reference = ReferenceTrajectory.from_polyline(points, speeds, closed=True)

    lo = points.min(axis=0) - cfg.margin
    hi = points.max(axis=0) + cfg.margin
    merged = {**default_profile_params(shape, profile, scale), **dict(profile_params or {})}
    grid = build_grid_from_catalog(profile, merged, (lo[0], hi[0], lo[1], hi[1]), cfg.spacing)
    stats = map_statistics(grid)
    logger.info(
        f"Track '{shape}' x{scale}: length {reference.length:.1f} m, "
        f"elevation range {stats['elevation_range_m']:.2f} m, max slope {stats['max_slope_deg']:.1f} deg"
    )
    return GeneratedTrack(reference, grid, stats)
