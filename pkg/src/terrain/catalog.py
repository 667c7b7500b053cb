"""
Analytic terrain catalog.

Each profile supplies a height field h(x, y) and its exact gradient so grids
carry analytic normals normalize(-dh/dx, -dh/dy, 1) instead of finite
differences.
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from terrain.grid import DEFAULT_SPACING, TerrainGrid
from utils.exceptions import InvalidBounds, UnknownProfile

FieldFn = Callable[[np.ndarray, np.ndarray, Dict[str, float]], np.ndarray]
GradFn = Callable[[np.ndarray, np.ndarray, Dict[str, float]], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class TerrainProfile:
    name: str
    height: FieldFn
    gradient: GradFn
    defaults: Dict[str, float]


def _flat_h(x, y, p):
    return np.zeros_like(x)


def _flat_g(x, y, p):
    return np.zeros_like(x), np.zeros_like(x)


def _tilted_h(x, y, p):
    s = math.tan(math.radians(p["slope_deg"]))
    a = math.radians(p["azimuth_deg"])
    return s * (x * math.cos(a) + y * math.sin(a))


def _tilted_g(x, y, p):
    s = math.tan(math.radians(p["slope_deg"]))
    a = math.radians(p["azimuth_deg"])
    return np.full_like(x, s * math.cos(a)), np.full_like(x, s * math.sin(a))


def _hills_h(x, y, p):
    return p["amplitude"] * np.sin(p["kx"] * x) * np.cos(p["ky"] * y)


def _hills_g(x, y, p):
    amp, kx, ky = p["amplitude"], p["kx"], p["ky"]
    hx = amp * kx * np.cos(kx * x) * np.cos(ky * y)
    hy = -amp * ky * np.sin(kx * x) * np.sin(ky * y)
    return hx, hy


def _spine_offset(x, y, p):
    """Vector from the nearest point of the ring spine segment to (x, y)."""
    half = 0.5 * p["straight_length"]
    sx = np.clip(x - p["center_x"], -half, half) + p["center_x"]
    return x - sx, y - p["center_y"]


def _ring_h(x, y, p):
    dx, dy = _spine_offset(x, y, p)
    d = np.hypot(dx, dy)
    inner = p["radius"] - 0.5 * p["width"]
    return math.tan(math.radians(p["bank_deg"])) * np.clip(d - inner, 0.0, p["width"])


def _ring_g(x, y, p):
    dx, dy = _spine_offset(x, y, p)
    d = np.hypot(dx, dy)
    inner = p["radius"] - 0.5 * p["width"]
    s = d - inner
    in_band = (s > 0.0) & (s < p["width"]) & (d > 0.0)
    scale = np.where(in_band, math.tan(math.radians(p["bank_deg"])) / np.where(d > 0, d, 1.0), 0.0)
    return scale * dx, scale * dy


def _crater_h(x, y, p):
    r2 = (x - p["center_x"]) ** 2 + (y - p["center_y"]) ** 2
    return -p["depth"] * np.exp(-r2 / p["radius"] ** 2)


def _crater_g(x, y, p):
    dx = x - p["center_x"]
    dy = y - p["center_y"]
    e = np.exp(-(dx**2 + dy**2) / p["radius"] ** 2)
    k = 2.0 * p["depth"] / p["radius"] ** 2
    return k * dx * e, k * dy * e


PROFILES: Dict[str, TerrainProfile] = {
    "flat": TerrainProfile("flat", _flat_h, _flat_g, {}),
    "tilted_plane": TerrainProfile(
        "tilted_plane", _tilted_h, _tilted_g, {"slope_deg": 10.0, "azimuth_deg": 0.0}
    ),
    "sinusoidal_hills": TerrainProfile(
        "sinusoidal_hills", _hills_h, _hills_g, {"amplitude": 1.0, "kx": 0.5, "ky": 0.0}
    ),
    "banked_ring": TerrainProfile(
        "banked_ring",
        _ring_h,
        _ring_g,
        {
            "radius": 10.0,
            "straight_length": 0.0,
            "bank_deg": 15.0,
            "width": 4.0,
            "center_x": 0.0,
            "center_y": 0.0,
        },
    ),
    "crater": TerrainProfile(
        "crater",
        _crater_h,
        _crater_g,
        {"radius": 8.0, "depth": 2.0, "center_x": 0.0, "center_y": 0.0},
    ),
}


def resolve_profile(
    profile_name: str, params: Optional[Mapping[str, float]] = None
) -> Tuple[TerrainProfile, Dict[str, float]]:
    """Look up a profile and merge user parameters over its defaults."""
    if profile_name not in PROFILES:
        raise UnknownProfile(
            f"Unknown terrain profile '{profile_name}', valid: {sorted(PROFILES)}"
        )
    profile = PROFILES[profile_name]
    merged = dict(profile.defaults)
    for key, value in (params or {}).items():
        if key not in merged:
            raise UnknownProfile(f"Profile '{profile_name}' has no parameter '{key}'")
        merged[key] = float(value)
    return profile, merged


def analytic_fields(
    profile_name: str, params: Optional[Mapping[str, float]], x, y
) -> Tuple[np.ndarray, np.ndarray]:
    """Exact (height, unit normal) of a catalog profile at arbitrary points."""
    profile, merged = resolve_profile(profile_name, params)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    height = profile.height(x, y, merged)
    hx, hy = profile.gradient(x, y, merged)
    normal = np.stack([-hx, -hy, np.ones_like(x)], axis=-1)
    normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
    return np.asarray(height, dtype=float), normal


def build_grid_from_catalog(
    profile_name: str,
    params: Optional[Mapping[str, float]],
    bounds: Sequence[float],
    spacing: float = DEFAULT_SPACING,
) -> TerrainGrid:
    """
    Sample an analytic profile onto a regular grid.

    Args:
        profile_name: One of flat, tilted_plane, sinusoidal_hills, banked_ring, crater
        params: Overrides for the profile's default parameters
        bounds: (x_min, x_max, y_min, y_max)
        spacing: Target node spacing, adjusted to span the bounds exactly

    Raises:
        UnknownProfile: Unknown profile or parameter name
        InvalidBounds: Empty or non-finite bounds, non-positive spacing
    """
    if len(bounds) != 4 or not np.all(np.isfinite(bounds)):
        raise InvalidBounds(f"Bounds must be 4 finite numbers, got {bounds}")
    x_min, x_max, y_min, y_max = (float(b) for b in bounds)
    if x_max <= x_min or y_max <= y_min:
        raise InvalidBounds(f"Empty bounds {bounds}")
    if not spacing > 0:
        raise InvalidBounds(f"Spacing must be positive, got {spacing}")

    profile, merged = resolve_profile(profile_name, params)
    extent = np.array([x_max - x_min, y_max - y_min])
    dims = np.maximum(np.round(extent / spacing).astype(int) + 1, 2)
    step = extent / (dims - 1)
    xs = x_min + np.arange(dims[0]) * step[0]
    ys = y_min + np.arange(dims[1]) * step[1]
    gx, gy = np.meshgrid(xs, ys, indexing="ij")

    height = profile.height(gx, gy, merged)
    hx, hy = profile.gradient(gx, gy, merged)
    normal = np.stack([-hx, -hy, np.ones_like(gx)], axis=-1)

    grid = TerrainGrid.from_fields((x_min, y_min), step, height, normal)
    logger.info(
        f"Built '{profile_name}' grid {grid.dims} over {bounds} with params {merged}"
    )
    return grid
