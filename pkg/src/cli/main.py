#!/usr/bin/env python3
"""
nptrack command line

    nptrack [--config FILE] [--seed N] [--out-dir DIR] COMMAND

Commands:
    gen-track   Generate a track, its terrain grid and map statistics
    collect     Drive the nominal controller with excitation and record residuals
    fit-gp      Fit the sparse GP residual model and report held-out RMSE
    run         Closed-loop runs per (mode, seed) with summaries
    plot        Figures from run logs

Exit codes: 0 ok, 2 usage or configuration error, 3 runtime failure.
"""

import functools
import os
import sys
from pathlib import Path
from typing import Dict, Optional, Tuple

import click
from dotenv import load_dotenv
from loguru import logger

from controllers.reference import ReferenceTrajectory
from gp.dataset import load_dataset, save_dataset
from gp.storage import load_residual_model, save_residual_model
from gp.training import train_residual_model
from models.config import (
    CONTROLLER_MODES,
    TERRAIN_PROFILES,
    TRACK_SHAPES,
    RunConfig,
    dump_run_config,
    load_run_config,
    with_overrides,
)
from pipelines.closed_loop import run_episodes, write_run_outputs
from pipelines.collection import collect_dataset
from simulation.tracks import generate_track
from terrain.statistics import write_map_statistics
from terrain.storage import load_grid, save_grid
from utils.diagnostics import diagnostics
from utils.exceptions import ConfigError, NPTrackError
from utils.logging_config import setup_logging

PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent
DEFAULT_CONFIG = PROJECT_ROOT / "config" / "nptrack.yaml"

TERRAIN_FILE = "terrain.nptg"
REFERENCE_FILE = "reference.csv"
MAP_STATS_FILE = "map_stats.txt"
DATASET_FILE = "dataset.csv"
MODEL_FILE = "gp_model.npgp"

EXIT_USAGE = 2
EXIT_RUNTIME = 3

# profile parameter scaled by --amp
AMPLITUDE_PARAMS = {
    "tilted_plane": "slope_deg",
    "sinusoidal_hills": "amplitude",
    "banked_ring": "bank_deg",
    "crater": "depth",
}


class Context:
    """Resolved global options shared by every command."""

    def __init__(self, cfg: RunConfig, out_dir: Path, seed: Optional[int]):
        self.cfg = cfg
        self.out_dir = out_dir
        self.seed = seed

    @property
    def base_seed(self) -> int:
        """--seed when given, else the first seed of the configuration."""
        return self.seed if self.seed is not None else self.cfg.seeds[0]

    def path(self, given: Optional[str], default_name: str) -> Path:
        return Path(given) if given else self.out_dir / default_name


def _fail(code: int, message: str) -> None:
    logger.error(message)
    click.echo(f"Error: {message}", err=True)
    sys.exit(code)


def handles_errors(func):
    """Map configuration errors to exit 2 and runtime failures to exit 3."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context().find_object(Context)
        try:
            return func(*args, **kwargs)
        except (ConfigError, FileNotFoundError) as e:
            _fail(EXIT_USAGE, str(e))
        except NPTrackError as e:
            _fail(EXIT_RUNTIME, f"{type(e).__name__}: {e}")
        finally:
            if ctx is not None:
                diagnostics.save_report(ctx.out_dir / "diagnostics.json")
                diagnostics.print_summary()

    return wrapper


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _apply_environment(cfg: RunConfig) -> RunConfig:
    load_dotenv(PROJECT_ROOT / "config" / ".env")
    workers = os.getenv("NPTRACK_WORKERS")
    if workers:
        try:
            return with_overrides(cfg, "mppi", workers=int(workers))
        except ValueError as e:
            raise ConfigError(f"NPTRACK_WORKERS must be an integer, got '{workers}'") from e
    return cfg


def _load_track(ctx: Context, terrain: Optional[str], reference: Optional[str]):
    grid = load_grid(_require(ctx.path(terrain, TERRAIN_FILE), "Terrain grid"))
    track = ReferenceTrajectory.from_csv(
        _require(ctx.path(reference, REFERENCE_FILE), "Reference trajectory")
    )
    return grid, track


def _parse_params(pairs: Tuple[str, ...]) -> Dict[str, float]:
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise click.BadParameter(f"expected KEY=VALUE, got '{pair}'", param_hint="--param")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise click.BadParameter(f"'{value}' is not a number", param_hint="--param")
    return params


@click.group(invoke_without_command=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="YAML run configuration (default: config/nptrack.yaml)")
@click.option("--seed", type=int, default=None, help="Base seed for collection and runs")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: output_dir from the config)")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
@click.option("--dump-config", type=click.Path(dir_okay=False), default=None,
              help="Write the resolved configuration as YAML")
@click.pass_context
def cli(ctx, config_path, seed, out_dir, log_level, dump_config):
    """Trajectory tracking on nonplanar terrain with online residual learning."""
    path = Path(config_path) if config_path else DEFAULT_CONFIG
    try:
        cfg = _apply_environment(load_run_config(path))
        if seed is not None:
            cfg = with_overrides(cfg, seeds=[seed])
    except ConfigError as e:
        _fail(EXIT_USAGE, str(e))

    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    setup_logging(log_level, log_file=out / "nptrack.log")
    diagnostics.reset()
    ctx.obj = Context(cfg, out, seed)

    if dump_config:
        dump_run_config(cfg, dump_config)
        logger.info(f"Configuration written to {dump_config}")
    elif ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@cli.command("gen-track")
@click.option("--shape", type=click.Choice(TRACK_SHAPES), default=None)
@click.option("--profile", type=click.Choice(TERRAIN_PROFILES), default=None)
@click.option("--scale", type=float, default=None)
@click.option("--amp", type=float, default=None, help="Main magnitude of the terrain profile")
@click.option("--param", "params", multiple=True, help="Profile parameter KEY=VALUE")
@click.pass_obj
@handles_errors
def gen_track(obj: Context, shape, profile, scale, amp, params):
    """Write terrain.nptg, reference.csv and map_stats.txt."""
    cfg = obj.cfg.track
    shape = shape or cfg.shape
    profile = profile or cfg.profile
    profile_params = {**cfg.profile_params, **_parse_params(params)}
    if amp is not None:
        if profile not in AMPLITUDE_PARAMS:
            raise click.BadParameter(f"profile '{profile}' has no amplitude", param_hint="--amp")
        profile_params[AMPLITUDE_PARAMS[profile]] = amp

    generated = generate_track(
        shape, scale or cfg.scale, profile, obj.cfg.vehicle, cfg, profile_params
    )
    save_grid(generated.grid, obj.out_dir / TERRAIN_FILE)
    generated.reference.to_csv(obj.out_dir / REFERENCE_FILE)
    write_map_statistics(generated.statistics, obj.out_dir / MAP_STATS_FILE)
    for key, value in generated.statistics.items():
        click.echo(f"{key} = {value:.6g}")


@cli.command()
@click.option("--duration", type=float, default=None, help="Seconds of driving")
@click.option("--terrain", default=None)
@click.option("--reference", default=None)
@click.option("--output", default=None)
@click.pass_obj
@handles_errors
def collect(obj: Context, duration, terrain, reference, output):
    """Record (xi, y) residual samples into dataset.csv."""
    cfg = with_overrides(obj.cfg, "collect", duration=duration)
    grid, track = _load_track(obj, terrain, reference)
    data = collect_dataset(track, grid, cfg, seed=obj.base_seed)
    save_dataset(data.inputs, data.targets, obj.path(output, DATASET_FILE))
    stats = data.stats()
    click.echo(
        f"samples = {stats['samples']}, steps = {stats['steps']}, rejected = {stats['rejected']}"
    )


@cli.command("fit-gp")
@click.option("--dataset", default=None)
@click.option("--output", default=None)
@click.option("--inducing", "-M", type=int, default=None, help="Number of inducing points")
@click.option("--grid-search/--no-grid-search", default=None)
@click.pass_obj
@handles_errors
def fit_gp(obj: Context, dataset, output, inducing, grid_search):
    """Fit the residual model and save gp_model.npgp."""
    gp_cfg = with_overrides(
        obj.cfg, "gp", inducing_points=inducing, grid_search=grid_search
    ).gp
    inputs, targets = load_dataset(_require(obj.path(dataset, DATASET_FILE), "Dataset"))
    report = train_residual_model(inputs, targets, gp_cfg)
    path = save_residual_model(report.model, obj.path(output, MODEL_FILE))
    for name, value in report.rmse.items():
        click.echo(f"rmse_{name} = {value:.6g}")
    logger.info(f"Model with {report.model.num_inducing} inducing points saved to {path}")


@cli.command()
@click.option("--mode", "modes", multiple=True, type=click.Choice(CONTROLLER_MODES))
@click.option("--seeds", type=int, default=None, help="Number of consecutive seeds")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--steps", type=int, default=None)
@click.option("--model", "model_path", default=None)
@click.option("--terrain", default=None)
@click.option("--reference", default=None)
@click.option("--bins", type=int, default=30, show_default=True)
@click.pass_obj
@handles_errors
def run(obj: Context, modes, seeds, jobs, steps, model_path, terrain, reference, bins):
    """Closed-loop runs; writes run/timing CSVs, summaries and histograms."""
    cfg = obj.cfg
    if steps is not None:
        cfg = with_overrides(cfg, steps=steps)
    if jobs < 1:
        raise ConfigError(f"--jobs must be at least 1, got {jobs}")
    base = obj.base_seed
    seed_list = list(range(base, base + seeds)) if seeds is not None else list(cfg.seeds)

    grid, track = _load_track(obj, terrain, reference)
    model = None
    model_file = Path(model_path) if model_path else cfg.gp.model_path
    model_file = Path(model_file) if model_file else obj.out_dir / MODEL_FILE
    if model_path:
        _require(model_file, "Residual model")
    if model_file.exists():
        model = load_residual_model(model_file)

    logs = run_episodes(track, grid, cfg, list(modes) or None, seed_list, model, jobs)
    paths = write_run_outputs(logs, obj.out_dir, bins)
    click.echo(f"summary = {paths['summary']}")


@cli.command()
@click.option("--run-dir", default=None, help="Directory holding run_*.csv (default: out dir)")
@click.option("--plot-dir", default=None)
@click.option("--bins", type=int, default=30, show_default=True)
@click.option("--terrain", default=None)
@click.option("--reference", default=None)
@click.pass_obj
@handles_errors
def plot(obj: Context, run_dir, plot_dir, bins, terrain, reference):
    """Trajectory overlays, error series, histograms and terrain maps."""
    from cli.plotting import load_run_logs, load_timing_logs, plot_run_directory

    if bins < 1:
        raise ConfigError(f"--bins must be positive, got {bins}")
    run_dir = Path(run_dir) if run_dir else obj.out_dir
    runs = load_run_logs(run_dir)
    if not runs:
        raise FileNotFoundError(f"No run logs (run_*.csv) in {run_dir}")

    grid_path = obj.path(terrain, TERRAIN_FILE)
    ref_path = obj.path(reference, REFERENCE_FILE)
    grid = load_grid(grid_path) if grid_path.exists() else None
    track = ReferenceTrajectory.from_csv(ref_path) if ref_path.exists() else None
    out = Path(plot_dir) if plot_dir else obj.out_dir / "plots"
    for path in plot_run_directory(runs, load_timing_logs(run_dir), out, bins, track, grid):
        click.echo(str(path))


def main():
    cli(prog_name="nptrack")


if __name__ == "__main__":
    main()
