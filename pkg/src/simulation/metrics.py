"""
Tracking metrics: signed cross-track error, per-run summaries and error
histograms.

Run summaries hold only quantities that are reproducible from the seed.
Wall-clock solve times go to a separate timing summary.
"""

from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from controllers.reference import project_onto_polyline

SUMMARY_COLUMNS = [
    "mode",
    "seed",
    "steps",
    "mean_abs_cte",
    "median_abs_cte",
    "max_abs_cte",
    "lap_completed",
    "departed",
]

TIMING_SUMMARY_COLUMNS = ["mode", "seed", "steps", "median_solve_ms", "frequency_hz"]


def cross_track_error(position, path) -> float:
    """
    Signed distance from position to the nearest point of a polyline.

    Positive when the point lies left of the path direction.
    """
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or path.shape[0] < 2:
        raise ValueError("Path needs at least 2 points")
    _, _, dist = project_onto_polyline(position, path)
    return dist


def error_statistics(errors: Iterable[float]) -> Tuple[float, float, float]:
    """(mean, median, max) of absolute errors; NaN for an empty set."""
    abs_err = np.abs(np.asarray(list(errors), dtype=float))
    if abs_err.size == 0:
        return float("nan"), float("nan"), float("nan")
    return float(abs_err.mean()), float(np.median(abs_err)), float(abs_err.max())


def summarize_run(
    mode: str,
    seed: int,
    cte: Sequence[float],
    lap_completed: bool,
    departed: bool,
) -> Dict[str, Any]:
    mean_e, median_e, max_e = error_statistics(cte)
    return {
        "mode": mode,
        "seed": int(seed),
        "steps": len(cte),
        "mean_abs_cte": mean_e,
        "median_abs_cte": median_e,
        "max_abs_cte": max_e,
        "lap_completed": bool(lap_completed),
        "departed": bool(departed),
    }


def summarize_timing(mode: str, seed: int, solve_ms: Sequence[float]) -> Dict[str, Any]:
    """Median solve time and the control frequency it sustains (1000 / median ms)."""
    median_ms = float(np.median(solve_ms)) if len(solve_ms) else float("nan")
    return {
        "mode": mode,
        "seed": int(seed),
        "steps": len(solve_ms),
        "median_solve_ms": median_ms,
        "frequency_hz": 1000.0 / median_ms if median_ms > 0 else float("nan"),
    }


def aggregate_by_mode(summary: pd.DataFrame) -> pd.DataFrame:
    """Per-mode means of the run metrics plus lap and departure counts."""
    if summary.empty:
        return pd.DataFrame()
    grouped = summary.groupby("mode", sort=True)
    return pd.DataFrame(
        {
            "runs": grouped.size(),
            "mean_abs_cte": grouped["mean_abs_cte"].mean(),
            "median_abs_cte": grouped["median_abs_cte"].median(),
            "max_abs_cte": grouped["max_abs_cte"].max(),
            "laps_completed": grouped["lap_completed"].sum(),
            "departures": grouped["departed"].sum(),
        }
    ).reset_index()


def error_histogram(
    errors: Iterable[float], bins: int = 30, value_range: Optional[Tuple[float, float]] = None
) -> pd.DataFrame:
    """Histogram of absolute errors as (bin_lo, bin_hi, count) rows."""
    abs_err = np.abs(np.asarray(list(errors), dtype=float))
    if value_range is None:
        top = float(abs_err.max()) if abs_err.size else 1.0
        value_range = (0.0, top if top > 0 else 1.0)
    counts, edges = np.histogram(abs_err, bins=bins, range=value_range)
    return pd.DataFrame({"bin_lo": edges[:-1], "bin_hi": edges[1:], "count": counts})
