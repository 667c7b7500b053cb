"""
Closed-Loop Pipeline

Runs the tracking loop for each controller mode:
1. Control: project onto the reference, slice it, solve one MPPI step
2. Actuation: apply the first input to the sub-stepped plant
3. Learning: in gp_recursive mode, fold the measured residual into the heads
4. Logging: one record per control step

Episodes end at the step budget, on lap completion, or on track departure
(leaving the map or the drivable corridor). Departures are recorded, not raised.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from controllers.mppi import MPPIController
from controllers.reference import ReferenceTrajectory
from dynamics.composed import assemble_gp_input, wrap_angle
from dynamics.single_track import ode_step
from gp.residual_model import ResidualModel, residual_target
from gp.training import prior_inducing_points
from models.config import CONTROLLER_MODES, RunConfig
from models.state import INPUT_LABELS, PSI, RESIDUAL_SLICE, STATE_DIM, STATE_LABELS, V
from simulation.metrics import (
    SUMMARY_COLUMNS,
    TIMING_SUMMARY_COLUMNS,
    aggregate_by_mode,
    error_histogram,
    summarize_run,
    summarize_timing,
)
from simulation.plant import TerrainPlant
from terrain.grid import TerrainGrid, roll_pitch_at
from utils.diagnostics import log_event
from utils.exceptions import ConfigError, OutlierRejected, OutOfBounds

LAP_RADIUS = 1.0
RESIDUAL_LABELS = ("dv", "dbeta", "dr")

RUN_COLUMNS = (
    ["step", "time"]
    + list(STATE_LABELS)
    + list(INPUT_LABELS)
    + ["ref_x", "ref_y", "ref_v", "ref_psi", "s", "cte", "heading_error"]
    + [f"gp_{n}" for n in RESIDUAL_LABELS]
    + [f"gp_std_{n}" for n in RESIDUAL_LABELS]
    + [f"res_{n}" for n in RESIDUAL_LABELS]
    + ["min_cost", "mean_cost", "ess", "failures"]
)
TIMING_COLUMNS = ["step", "time", "solve_ms"]


@dataclass
class StepRecord:
    step: int
    time: float
    state: np.ndarray
    control: np.ndarray
    reference: np.ndarray
    s: float
    cte: float
    heading_error: float
    gp_mean: np.ndarray
    gp_std: np.ndarray
    residual: np.ndarray
    min_cost: float
    mean_cost: float
    ess: float
    failures: int
    solve_ms: float

    def row(self) -> list:
        return (
            [self.step, self.time]
            + self.state.tolist()
            + self.control.tolist()
            + self.reference.tolist()
            + [self.s, self.cte, self.heading_error]
            + self.gp_mean.tolist()
            + self.gp_std.tolist()
            + self.residual.tolist()
            + [self.min_cost, self.mean_cost, self.ess, self.failures]
        )


@dataclass
class RunLog:
    mode: str
    seed: int
    records: List[StepRecord] = field(default_factory=list)
    lap_completed: bool = False
    departed: bool = False
    departure_reason: Optional[str] = None
    gain_resets: int = 0
    outliers: int = 0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def name(self) -> str:
        return f"{self.mode}_seed{self.seed}"

    def to_frame(self) -> pd.DataFrame:
        """Deterministic columns; wall-clock timing lives in timing_frame()."""
        return pd.DataFrame([r.row() for r in self.records], columns=RUN_COLUMNS)

    def timing_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.step, r.time, r.solve_ms] for r in self.records], columns=TIMING_COLUMNS
        )

    def summary(self) -> Dict:
        return summarize_run(
            self.mode,
            self.seed,
            [r.cte for r in self.records],
            self.lap_completed,
            self.departed,
        )

    def timing_summary(self) -> Dict:
        return summarize_timing(self.mode, self.seed, [r.solve_ms for r in self.records])

    def to_csv(self, out_dir: Union[str, Path]) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"run_{self.name}.csv"
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        self.timing_frame().to_csv(out_dir / f"timing_{self.name}.csv", index=False)
        return path


class ClosedLoopRunner:
    """Runs episodes of one controller on one track."""

    def __init__(
        self,
        track: ReferenceTrajectory,
        grid: TerrainGrid,
        cfg: RunConfig,
        model: Optional[ResidualModel] = None,
    ):
        """
        Initialize the runner.

        Args:
            track: Reference trajectory
            grid: Terrain grid containing the track
            cfg: Run configuration
            model: Offline-trained residual model; a prior model is built when
                a GP mode runs without one
        """
        self.track = track
        self.grid = grid
        self.cfg = cfg
        self.model = model
        if not np.all(grid.contains(track.points)):
            raise ConfigError("Track leaves the terrain grid")

    def _initial_state(self) -> np.ndarray:
        x0 = np.zeros(STATE_DIM)
        x0[:2] = self.track.points[0]
        x0[PSI] = self.track.headings[0]
        speed = self.cfg.initial_speed
        x0[V] = self.track.speeds[0] if speed is None else speed
        return x0

    def _model_for(self, mode: str) -> Optional[ResidualModel]:
        if mode == "baseline":
            return None
        if self.model is not None:
            return self.model.copy()
        logger.warning(f"No trained residual model for mode '{mode}'; starting from the prior")
        inducing = prior_inducing_points(
            self.cfg.gp.inducing_points,
            self.cfg.vehicle,
            np.asarray(self.cfg.gp.lengthscales),
            self.cfg.gp.kmeans_seed,
        )
        return ResidualModel.from_config(inducing, self.cfg.gp)

    def run(self, mode: str, seed: int, steps: Optional[int] = None) -> RunLog:
        """
        Run one episode.

        Args:
            mode: baseline, gp or gp_recursive
            seed: Episode seed (plant noise and controller stream offset)
            steps: Step budget, defaults to cfg.steps

        Returns:
            RunLog with one record per completed control step
        """
        if mode not in CONTROLLER_MODES:
            raise ConfigError(f"Unknown controller mode '{mode}', valid: {CONTROLLER_MODES}")
        cfg = self.cfg
        steps = cfg.steps if steps is None else steps
        dt = cfg.mppi.dt
        params = cfg.vehicle
        mppi_cfg = cfg.mppi.model_copy(update={"seed": cfg.mppi.seed + seed})

        log = RunLog(mode=mode, seed=seed)
        if steps == 0:
            return log

        model = self._model_for(mode)
        controller = MPPIController(self.grid, params, mppi_cfg, model.snapshot() if model else None)
        plant = TerrainPlant(self.grid, params, cfg.plant, seed=seed)
        x = self._initial_state()
        s, cte = self.track.project(x[:2])
        start = self.track.points[0]
        progress = 0.0
        nan3 = np.full(3, np.nan)

        logger.info(f"Running {mode} seed {seed} for up to {steps} steps")
        try:
            for k in range(steps):
                ref_slice = self.track.slice(s, mppi_cfg.horizon, dt, x[V], mppi_cfg.min_progress_speed)
                if mode == "gp_recursive":
                    controller.set_model(model.snapshot())
                u, diag = controller.control(x, ref_slice)

                gp_mean, gp_std = nan3, nan3
                rp, _ = roll_pitch_at(self.grid, x[:2])
                if model is not None:
                    mean, var = model.predict(assemble_gp_input(x, u, rp)[None])
                    gp_mean, gp_std = mean[0], np.sqrt(var[0])

                record = StepRecord(
                    step=k,
                    time=k * dt,
                    state=x.copy(),
                    control=np.asarray(u, dtype=float),
                    reference=ref_slice[0],
                    s=s,
                    cte=cte,
                    heading_error=float(wrap_angle(x[PSI] - ref_slice[0, 3])),
                    gp_mean=gp_mean,
                    gp_std=gp_std,
                    residual=nan3,
                    min_cost=diag.min_cost,
                    mean_cost=diag.mean_cost,
                    ess=diag.ess,
                    failures=diag.failures,
                    solve_ms=diag.solve_ms,
                )
                log.records.append(record)

                try:
                    x_next = plant.step(x, u, dt)
                except OutOfBounds:
                    self._depart(log, "left_map", k)
                    break
                record.residual = (x_next - ode_step(x, u, params, dt))[RESIDUAL_SLICE]

                if mode == "gp_recursive":
                    try:
                        y = residual_target(x, u, x_next, params, dt, cfg.gp.outlier_gate)
                        log.gain_resets += len(model.update(assemble_gp_input(x, u, rp), y))
                    except OutlierRejected:
                        log.outliers += 1

                s_next, cte = self.track.project(x_next[:2], hint=s)
                progress += self._arc_delta(s, s_next)
                s, x = s_next, x_next

                if abs(cte) > cfg.plant.corridor_half_width:
                    self._depart(log, "corridor", k)
                    break
                if progress >= self.track.length and np.hypot(*(x[:2] - start)) <= LAP_RADIUS:
                    log.lap_completed = True
                    logger.info(f"{mode} seed {seed}: lap completed at step {k + 1}")
                    break
        finally:
            controller.close()

        summary = log.summary()
        logger.info(
            f"{mode} seed {seed}: {len(log)} steps, mean |cte| {summary['mean_abs_cte']:.3f} m, "
            f"lap {'yes' if log.lap_completed else 'no'}"
        )
        return log

    def _arc_delta(self, s_prev: float, s_next: float) -> float:
        ds = s_next - s_prev
        if self.track.closed:
            half = 0.5 * self.track.length
            ds = (ds + half) % self.track.length - half
        return ds

    @staticmethod
    def _depart(log: RunLog, reason: str, step: int) -> None:
        log.departed = True
        log.departure_reason = reason
        log_event("track_departure", f"{log.name} at step {step}: {reason}")
        logger.warning(f"{log.name}: track departure ({reason}) at step {step}")


def run_closed_loop(
    track: ReferenceTrajectory,
    grid: TerrainGrid,
    mode: str,
    cfg: RunConfig,
    seed: int = 0,
    steps: Optional[int] = None,
    model: Optional[ResidualModel] = None,
) -> RunLog:
    return ClosedLoopRunner(track, grid, cfg, model).run(mode, seed, steps)


def _episode(args) -> RunLog:
    track, grid, cfg, model, mode, seed, steps = args
    return run_closed_loop(track, grid, mode, cfg, seed, steps, model)


def run_episodes(
    track: ReferenceTrajectory,
    grid: TerrainGrid,
    cfg: RunConfig,
    modes: Optional[Sequence[str]] = None,
    seeds: Optional[Sequence[int]] = None,
    model: Optional[ResidualModel] = None,
    jobs: int = 1,
    steps: Optional[int] = None,
) -> List[RunLog]:
    """
    Run every (mode, seed) pair, optionally in parallel worker processes.

    Results come back in (mode, seed) order regardless of jobs.
    """
    modes = list(modes or cfg.modes)
    seeds = list(cfg.seeds if seeds is None else seeds)
    tasks = [(track, grid, cfg, model, mode, seed, steps) for mode in modes for seed in seeds]
    logger.info(f"Running {len(tasks)} episodes with {jobs} job(s)")
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_episode, tasks))
    return [_episode(task) for task in tasks]


def write_run_outputs(
    logs: Sequence[RunLog], out_dir: Union[str, Path], bins: int = 30
) -> Dict[str, Path]:
    """
    Write per-run CSVs, the run summary, the per-mode summary and
    absolute cross-track-error histograms per mode.

    Everything except the timing files is byte-identical across reruns with
    the same configuration and seeds.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for log in logs:
        log.to_csv(out_dir)

    summary = pd.DataFrame([log.summary() for log in logs], columns=SUMMARY_COLUMNS)
    paths = {
        "summary": out_dir / "summary.csv",
        "by_mode": out_dir / "summary_by_mode.csv",
        "timing": out_dir / "timing_summary.csv",
    }
    summary.to_csv(paths["summary"], index=False, float_format="%.17g")
    aggregate_by_mode(summary).to_csv(paths["by_mode"], index=False, float_format="%.17g")
    pd.DataFrame([log.timing_summary() for log in logs], columns=TIMING_SUMMARY_COLUMNS).to_csv(
        paths["timing"], index=False
    )

    all_errors = [abs(r.cte) for log in logs for r in log.records]
    top = max(all_errors) if all_errors else 1.0
    value_range = (0.0, top if top > 0 else 1.0)
    for mode in sorted({log.mode for log in logs}):
        errors = [r.cte for log in logs if log.mode == mode for r in log.records]
        path = out_dir / f"hist_cte_{mode}.csv"
        error_histogram(errors, bins=bins, value_range=value_range).to_csv(path, index=False)
        paths[f"hist_{mode}"] = path
    logger.info(f"Wrote {len(logs)} run logs and summaries to {out_dir}")
    return paths
