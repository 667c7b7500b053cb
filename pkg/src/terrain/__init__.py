"""Terrain fields: grids, analytic catalog, statistics and file I/O."""

from terrain.catalog import analytic_fields, build_grid_from_catalog
from terrain.grid import (
    OrientedPoint,
    RollPitch,
    TerrainGrid,
    build_grid_from_points,
    normal_from_roll_pitch,
    query_fields,
    roll_pitch_at,
    roll_pitch_from_normal,
)
from terrain.statistics import map_statistics, write_map_statistics
from terrain.storage import load_grid, load_point_cloud, save_grid

__all__ = [
    "OrientedPoint",
    "RollPitch",
    "TerrainGrid",
    "analytic_fields",
    "build_grid_from_catalog",
    "build_grid_from_points",
    "load_grid",
    "load_point_cloud",
    "map_statistics",
    "normal_from_roll_pitch",
    "query_fields",
    "roll_pitch_at",
    "roll_pitch_from_normal",
    "save_grid",
    "write_map_statistics",
]
