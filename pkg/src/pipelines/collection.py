"""
Offline data collection: drive the plant with the nominal MPPI controller
plus uniform input excitation and record (xi, y) residual samples.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np
from loguru import logger

from controllers.mppi import MPPIController
from controllers.reference import ReferenceTrajectory
from dynamics.composed import GP_INPUT_DIM, assemble_gp_input
from gp.residual_model import residual_target
from models.config import RunConfig
from models.state import PSI, RESIDUAL_DIM, STATE_DIM, V
from simulation.plant import TerrainPlant
from terrain.grid import TerrainGrid, roll_pitch_at
from utils.diagnostics import log_event
from utils.exceptions import OutlierRejected, OutOfBounds, TrackDeparture


@dataclass
class CollectedData:
    inputs: np.ndarray
    targets: np.ndarray
    steps: int = 0
    rejected: int = 0
    departed: bool = False

    def stats(self) -> Dict[str, int]:
        return {
            "steps": self.steps,
            "samples": int(self.inputs.shape[0]),
            "rejected": self.rejected,
            "departed": int(self.departed),
        }


def excitation(
    rng: np.random.Generator, lower: np.ndarray, upper: np.ndarray, fraction: float
) -> np.ndarray:
    """Uniform perturbation within fraction of each input bound."""
    return rng.uniform(fraction * lower, fraction * upper)


def collect_dataset(
    track: ReferenceTrajectory, grid: TerrainGrid, cfg: RunConfig, seed: int = 0
) -> CollectedData:
    """
    Collect residual samples for the configured duration.

    Each completed control step yields one sample unless its residual
    exceeds the outlier gate. Leaving the map or the corridor ends the
    collection early.

    Raises:
        TrackDeparture: The vehicle departs on the first control step
    """
    dt = cfg.mppi.dt
    steps = int(round(cfg.collect.duration / dt))
    params = cfg.vehicle
    inputs, targets = [], []
    result = CollectedData(np.empty((0, GP_INPUT_DIM)), np.empty((0, RESIDUAL_DIM)))
    if steps == 0:
        logger.info("Collection duration is zero; writing an empty dataset")
        return result

    mppi_cfg = cfg.mppi.model_copy(update={"seed": cfg.mppi.seed + seed})
    lower, upper = mppi_cfg.input_box(params)
    controller = MPPIController(grid, params, mppi_cfg)
    plant = TerrainPlant(grid, params, cfg.plant, seed=seed)
    rng = np.random.default_rng(seed)

    x = np.zeros(STATE_DIM)
    x[:2] = track.points[0]
    x[PSI] = track.headings[0]
    x[V] = track.speeds[0] if cfg.initial_speed is None else cfg.initial_speed
    s, _ = track.project(x[:2])

    logger.info(f"Collecting {steps} steps ({cfg.collect.duration:.1f} s) with seed {seed}")
    try:
        for k in range(steps):
            if k and k % 500 == 0:
                logger.info(f"Processing {k}/{steps}")
            ref_slice = track.slice(s, mppi_cfg.horizon, dt, x[V], mppi_cfg.min_progress_speed)
            u, _ = controller.control(x, ref_slice)
            u = np.clip(u + excitation(rng, lower, upper, cfg.collect.excitation_fraction), lower, upper)
            rp, _ = roll_pitch_at(grid, x[:2])

            try:
                x_next = plant.step(x, u, dt)
            except OutOfBounds as e:
                if k == 0:
                    raise TrackDeparture("Vehicle left the map on the first step", e.context) from e
                result.departed = True
                log_event("track_departure", f"collection left the map at step {k}")
                break
            result.steps += 1

            try:
                targets.append(residual_target(x, u, x_next, params, dt, cfg.gp.outlier_gate))
                inputs.append(assemble_gp_input(x, u, rp))
            except OutlierRejected:
                result.rejected += 1

            s, cte = track.project(x_next[:2], hint=s)
            x = x_next
            if abs(cte) > cfg.plant.corridor_half_width:
                if k == 0:
                    raise TrackDeparture(
                        f"Vehicle left the corridor on the first step (cte {cte:.2f} m)"
                    )
                result.departed = True
                log_event("track_departure", f"collection left the corridor at step {k}")
                break
    finally:
        controller.close()

    if inputs:
        result.inputs = np.vstack(inputs)
        result.targets = np.vstack(targets)
    logger.info(
        f"Collected {result.inputs.shape[0]} samples from {result.steps} steps "
        f"({result.rejected} rejected)"
    )
    return result
