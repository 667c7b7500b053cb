"""
Static figures for closed-loop runs and terrain grids.

All figures are rendered with the Agg backend and written as PNG files.
"""

from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from loguru import logger  # noqa: E402

from controllers.reference import ReferenceTrajectory  # noqa: E402
from simulation.metrics import error_histogram  # noqa: E402
from terrain.grid import TerrainGrid  # noqa: E402

MODE_COLORS = {"baseline": "tab:red", "gp": "tab:blue", "gp_recursive": "tab:green"}
QUIVER_STRIDE = 8

mpl.rcParams.update(
    {
        "axes.labelsize": 10,
        "font.size": 10,
        "legend.fontsize": 8,
        "xtick.labelsize": 8,
        "ytick.labelsize": 8,
        "lines.linewidth": 1.0,
        "savefig.bbox": "tight",
    }
)


def savefig(fig, path: Union[str, Path], dpi: int = 150) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    logger.debug(f"Figure saved to {path}")
    return path


def _color(name: str) -> Optional[str]:
    return MODE_COLORS.get(name.split("_seed")[0])


def plot_trajectories(
    reference: Optional[ReferenceTrajectory],
    runs: Mapping[str, pd.DataFrame],
    path: Union[str, Path],
) -> Path:
    """Overlay every run's driven path on the reference centerline."""
    fig, ax = plt.subplots(figsize=(6, 5))
    if reference is not None:
        ax.plot(*reference.points.T, "k--", lw=0.8, label="reference")
    for name, frame in runs.items():
        ax.plot(frame["p_x"], frame["p_y"], color=_color(name), alpha=0.8, label=name)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(loc="best")
    return savefig(fig, path)


def plot_cte_series(runs: Mapping[str, pd.DataFrame], path: Union[str, Path]) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3))
    for name, frame in runs.items():
        ax.plot(frame["time"], frame["cte"], color=_color(name), label=name)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("cross-track error (m)")
    ax.legend(loc="best")
    return savefig(fig, path)


def plot_error_histograms(
    errors: Mapping[str, np.ndarray], path: Union[str, Path], bins: int
) -> Path:
    """Absolute cross-track error distribution per mode on shared bins."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    stacked = np.concatenate([np.abs(e) for e in errors.values()]) if errors else np.zeros(1)
    top = float(stacked.max()) if stacked.size and stacked.max() > 0 else 1.0
    for mode, values in errors.items():
        ax.hist(
            np.abs(values),
            bins=bins,
            range=(0.0, top),
            histtype="step",
            color=MODE_COLORS.get(mode),
            label=mode,
        )
    ax.set_xlabel("|cross-track error| (m)")
    ax.set_ylabel("count")
    ax.legend(loc="best")
    return savefig(fig, path)


def plot_solve_frequency(
    solve_ms: Mapping[str, np.ndarray], path: Union[str, Path], bins: int
) -> Path:
    """Control frequency (1000 / solve ms) per mode."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for mode, values in solve_ms.items():
        values = np.asarray(values, dtype=float)
        freq = 1000.0 / values[values > 0]
        ax.hist(freq, bins=bins, histtype="step", color=MODE_COLORS.get(mode), label=mode)
    ax.set_xlabel("control frequency (Hz)")
    ax.set_ylabel("count")
    ax.legend(loc="best")
    return savefig(fig, path)


def plot_terrain(
    grid: TerrainGrid, path: Union[str, Path], reference: Optional[ReferenceTrajectory] = None
) -> Path:
    """Height map, slope map and a subsampled normal quiver side by side."""
    x_min, x_max, y_min, y_max = grid.bounds
    extent = (x_min, x_max, y_min, y_max)
    fig, axes = plt.subplots(1, 3, figsize=(14, 4.2))

    panels = [
        (grid.height, "height (m)", "terrain"),
        (np.degrees(grid.slope), "slope (deg)", "viridis"),
    ]
    for ax, (field, label, cmap) in zip(axes[:2], panels):
        image = ax.imshow(field.T, origin="lower", extent=extent, cmap=cmap, aspect="equal")
        fig.colorbar(image, ax=ax, label=label, shrink=0.8)

    xs, ys = grid.node_coordinates()
    gx, gy = np.meshgrid(xs[::QUIVER_STRIDE], ys[::QUIVER_STRIDE], indexing="ij")
    normals = grid.normal[::QUIVER_STRIDE, ::QUIVER_STRIDE]
    tilt = np.degrees(grid.slope[::QUIVER_STRIDE, ::QUIVER_STRIDE])
    axes[2].quiver(gx, gy, normals[..., 0], normals[..., 1], tilt)
    axes[2].set_aspect("equal")
    axes[2].set_title("normal (x, y)")

    for ax in axes:
        if reference is not None:
            ax.plot(*reference.points.T, "w--" if ax is not axes[2] else "k--", lw=0.8)
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
    return savefig(fig, path)


def _run_name(path: Path) -> str:
    return path.stem[len("run_"):]


def load_run_logs(run_dir: Union[str, Path]) -> Dict[str, pd.DataFrame]:
    """Read every run_<mode>_seed<k>.csv in run_dir, keyed by <mode>_seed<k>."""
    return {_run_name(p): pd.read_csv(p) for p in sorted(Path(run_dir).glob("run_*.csv"))}


def load_timing_logs(run_dir: Union[str, Path]) -> Dict[str, pd.DataFrame]:
    return {
        p.stem[len("timing_"):]: pd.read_csv(p) for p in sorted(Path(run_dir).glob("timing_*.csv"))
    }


def _by_mode(frames: Mapping[str, pd.DataFrame], column: str) -> Dict[str, np.ndarray]:
    grouped: Dict[str, List[np.ndarray]] = {}
    for name, frame in frames.items():
        grouped.setdefault(name.split("_seed")[0], []).append(frame[column].to_numpy(dtype=float))
    return {mode: np.concatenate(parts) for mode, parts in sorted(grouped.items())}


def plot_run_directory(
    runs: Mapping[str, pd.DataFrame],
    timing: Mapping[str, pd.DataFrame],
    out_dir: Union[str, Path],
    bins: int = 30,
    reference: Optional[ReferenceTrajectory] = None,
    grid: Optional[TerrainGrid] = None,
) -> List[Path]:
    """Emit the full figure set for one track's runs."""
    out_dir = Path(out_dir)
    written = [
        plot_trajectories(reference, runs, out_dir / "trajectories.png"),
        plot_cte_series(runs, out_dir / "cte_series.png"),
        plot_error_histograms(_by_mode(runs, "cte"), out_dir / "cte_histogram.png", bins),
    ]
    for mode, errors in _by_mode(runs, "cte").items():
        path = out_dir / f"cte_histogram_{mode}.csv"
        error_histogram(errors, bins=bins).to_csv(path, index=False)
        written.append(path)
    if timing:
        written.append(
            plot_solve_frequency(_by_mode(timing, "solve_ms"), out_dir / "solve_frequency.png", bins)
        )
    if grid is not None:
        written.append(plot_terrain(grid, out_dir / "terrain.png", reference))
    logger.info(f"Wrote {len(written)} plot files to {out_dir}")
    return written
