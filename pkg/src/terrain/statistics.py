"""
Map statistics for terrain grids: elevation extremes and slope percentiles in
degrees.
"""

from collections import OrderedDict
from pathlib import Path
from typing import Dict, Union

import numpy as np
from loguru import logger

from terrain.grid import TerrainGrid

STAT_LABELS = OrderedDict(
    [
        ("min_elevation_m", "Min elevation (m)"),
        ("max_elevation_m", "Max elevation (m)"),
        ("elevation_range_m", "Elevation range (m)"),
        ("max_slope_deg", "Max slope (deg)"),
        ("median_slope_deg", "Median slope (deg)"),
    ]
)


def map_statistics(grid: TerrainGrid) -> Dict[str, float]:
    height = grid.height
    slope_deg = np.degrees(grid.slope)
    stats = {
        "min_elevation_m": float(height.min()),
        "max_elevation_m": float(height.max()),
        "elevation_range_m": float(height.max() - height.min()),
        "max_slope_deg": float(slope_deg.max()),
        "median_slope_deg": float(np.median(slope_deg)),
    }
    return stats


def write_map_statistics(stats: Dict[str, float], path: Union[str, Path]) -> Path:
    """Write statistics as 'key = value' lines, one metric per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {label}\n{key} = {stats[key]:.6f}" for key, label in STAT_LABELS.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Map statistics written to {path}")
    return path


def read_map_statistics(path: Union[str, Path]) -> Dict[str, float]:
    stats: Dict[str, float] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        stats[key.strip()] = float(value)
    return stats
