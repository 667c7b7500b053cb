"""
MPPI Controller

Sampling-based receding-horizon tracking controller: truncated-normal input
sampling around the warm start, terrain-aware rollouts of the composed model,
exponentiated-cost importance weights and a weighted average of the samples.

Rollouts are split into fixed-size chunks independent of the worker count, so
results are bit-identical for any number of workers.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from loguru import logger

from controllers.sampling import sample_controls
from dynamics.composed import ResidualPredictor, propagate
from models.config import MPPIConfig, VehicleParams
from models.state import INPUT_DIM, PSI, PX, PY, STATE_DIM, V
from terrain.grid import TerrainGrid, roll_pitch_at
from utils.diagnostics import log_event
from utils.exceptions import AllRolloutsFailed

CHUNK_SIZE = 128


@dataclass
class RolloutBatch:
    """Sampled sequences with their trajectories, costs and weights."""

    controls: np.ndarray  # (N, H, 2)
    states: np.ndarray  # (N, H+1, 7)
    costs: np.ndarray  # (N,)
    weights: np.ndarray  # (N,)
    failed: np.ndarray  # (N,) bool


@dataclass
class StepDiagnostics:
    min_cost: float
    mean_cost: float
    ess: float
    solve_ms: float
    failures: int
    all_failed: bool = False


def rollout_batch(
    x0,
    controls: np.ndarray,
    grid: TerrainGrid,
    model: Optional[ResidualPredictor],
    p: VehicleParams,
    dt: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Propagate N control sequences from x0.

    At every step roll/pitch is looked up at the current predicted position.
    A rollout that leaves the grid (or turns non-finite) is flagged and its
    remaining states are frozen.

    Returns:
        (states (N, H+1, 7), failed (N,))
    """
    controls = np.asarray(controls, dtype=float)
    n, horizon, _ = controls.shape
    states = np.empty((n, horizon + 1, STATE_DIM))
    states[:, 0] = np.asarray(x0, dtype=float)
    alive = np.ones(n, dtype=bool)

    for t in range(horizon):
        x = states[:, t]
        rp, inside = roll_pitch_at(grid, x[:, :2])
        alive &= inside
        x_next = propagate(x, controls[:, t], rp, model, p, dt, check=False)
        alive &= np.all(np.isfinite(x_next), axis=1)
        states[:, t + 1] = np.where(alive[:, None], x_next, x)

    alive &= grid.contains(states[:, -1, :2])
    return states, ~alive


def rollout(x0, u_seq, grid, model, p: VehicleParams, dt: float) -> Tuple[np.ndarray, bool]:
    """Single-sequence rollout: ((H+1, 7) states, failure flag)."""
    states, failed = rollout_batch(x0, np.asarray(u_seq, dtype=float)[None], grid, model, p, dt)
    return states[0], bool(failed[0])


def _tracking_error(states: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """(..., 4) errors on (p_x, p_y, v, psi) with the heading difference wrapped."""
    dpsi = states[..., PSI] - ref[..., 3]
    return np.stack(
        [
            states[..., PX] - ref[..., 0],
            states[..., PY] - ref[..., 1],
            states[..., V] - ref[..., 2],
            np.arctan2(np.sin(dpsi), np.cos(dpsi)),
        ],
        axis=-1,
    )


def trajectory_cost(
    states: np.ndarray,
    u_seq: np.ndarray,
    ref: np.ndarray,
    cfg: MPPIConfig,
    failed: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    J = sum_t |x_t - ref_t|_Q^2 + |u_t|_R^2 + sum_t |u_{t+1} - u_t|_Rd^2 + |x_H - ref_H|_QH^2

    Works on a single trajectory ((H+1, 7), (H, 2)) or a batch with a leading
    sample axis. Failed rollouts add cfg.failure_cost.
    """
    states = np.asarray(states, dtype=float)
    u_seq = np.asarray(u_seq, dtype=float)
    ref = np.asarray(ref, dtype=float)
    q = np.asarray(cfg.q, dtype=float)
    r = np.asarray(cfg.r, dtype=float)
    r_d = np.asarray(cfg.r_d, dtype=float)
    q_h = cfg.terminal_weights()

    err = _tracking_error(states, ref)
    running = np.sum(err[..., :-1, :] ** 2 * q, axis=(-2, -1))
    effort = np.sum(u_seq**2 * r, axis=(-2, -1))
    smooth = np.sum(np.diff(u_seq, axis=-2) ** 2 * r_d, axis=(-2, -1))
    terminal = np.sum(err[..., -1, :] ** 2 * q_h, axis=-1)
    cost = running + effort + smooth + terminal
    if failed is not None:
        cost = cost + np.where(failed, cfg.failure_cost, 0.0)
    return cost


def importance_weights(costs: np.ndarray, temperature: float) -> np.ndarray:
    """
    w_s = exp(-(J_s - min J) / tau) / sum_j exp(-(J_j - min J) / tau)

    Non-finite costs receive weight 0.

    Raises:
        AllRolloutsFailed: No finite cost
    """
    costs = np.asarray(costs, dtype=float)
    finite = np.isfinite(costs)
    if not finite.any():
        raise AllRolloutsFailed("Every rollout failed")
    best = costs[finite].min()
    shifted = np.where(finite, costs - best, 0.0)
    raw = np.where(finite, np.exp(-shifted / temperature), 0.0)
    return raw / raw.sum()


def optimal_sequence(samples: np.ndarray, weights: np.ndarray, bounds=None) -> np.ndarray:
    """Weighted average of sampled sequences, re-clamped to the input box."""
    avg = np.einsum("n,nhc->hc", np.asarray(weights, dtype=float), np.asarray(samples, dtype=float))
    if bounds is not None:
        avg = np.clip(avg, bounds[0], bounds[1])
    return avg


def effective_sample_size(weights: np.ndarray) -> float:
    return float(1.0 / np.sum(np.square(weights)))


def shift_warm_start(opt: np.ndarray) -> np.ndarray:
    """Drop the first entry and repeat the last one."""
    opt = np.asarray(opt, dtype=float)
    return np.concatenate([opt[1:], opt[-1:]], axis=0)


def _evaluate_chunk(ids, x_k, ref_slice, mean, grid, model, params, cfg, bounds, step):
    controls = sample_controls(mean, cfg, bounds, step=step, sample_ids=ids)
    states, failed = rollout_batch(x_k, controls, grid, model, params, cfg.dt)
    costs = trajectory_cost(states, controls, ref_slice, cfg, failed)
    return controls, states, costs, failed


def mppi_step(
    x_k,
    ref_slice: np.ndarray,
    prev_opt: np.ndarray,
    grid: TerrainGrid,
    model: Optional[ResidualPredictor],
    cfg: MPPIConfig,
    params: VehicleParams,
    step: int = 0,
    executor: Optional[ThreadPoolExecutor] = None,
) -> Tuple[np.ndarray, np.ndarray, StepDiagnostics, RolloutBatch]:
    """
    One MPPI iteration around the warm start prev_opt.

    Args:
        x_k: Current state (7,)
        ref_slice: (H+1, 4) reference rows (p_x, p_y, v, psi)
        prev_opt: (H, 2) warm start
        grid: Terrain grid
        model: Residual model snapshot, or None for the nominal model
        cfg: Controller configuration
        params: Vehicle parameters (input box defaults)
        step: Control step index, keys the random stream
        executor: Optional pool running sample chunks concurrently

    Returns:
        (u_apply (2,), new_opt (H, 2), diagnostics, rollout batch)
        If every rollout fails, new_opt is prev_opt shifted with zeros appended
        and u_apply brakes at the minimum acceleration with zero steer rate.
    """
    start = time.perf_counter()
    bounds = cfg.input_box(params)
    mean = np.clip(np.asarray(prev_opt, dtype=float), bounds[0], bounds[1])
    ref_slice = np.asarray(ref_slice, dtype=float)

    chunks = [
        np.arange(lo, min(lo + CHUNK_SIZE, cfg.samples)) for lo in range(0, cfg.samples, CHUNK_SIZE)
    ]
    args = (x_k, ref_slice, mean, grid, model, params, cfg, bounds, step)
    if executor is not None and len(chunks) > 1:
        results = list(executor.map(lambda ids: _evaluate_chunk(ids, *args), chunks))
    else:
        results = [_evaluate_chunk(ids, *args) for ids in chunks]
    controls, states, costs, failed = (np.concatenate(parts) for parts in zip(*results))

    failures = int(failed.sum())
    if failures:
        log_event("rollout_failure", count=failures)
    ok_costs = costs[~failed]

    try:
        weights = importance_weights(np.where(failed, np.inf, costs), cfg.temperature)
    except AllRolloutsFailed:
        log_event("all_rollouts_failed", f"step {step}")
        logger.warning(f"All {cfg.samples} rollouts failed at step {step}; braking")
        new_opt = np.concatenate([mean[1:], np.zeros((1, INPUT_DIM))], axis=0)
        new_opt = np.clip(new_opt, bounds[0], bounds[1])
        u_apply = np.array([bounds[0][0], 0.0])
        weights = np.zeros(cfg.samples)
        diag = StepDiagnostics(
            min_cost=float(costs.min()),
            mean_cost=float(costs.mean()),
            ess=0.0,
            solve_ms=1000.0 * (time.perf_counter() - start),
            failures=failures,
            all_failed=True,
        )
        return u_apply, new_opt, diag, RolloutBatch(controls, states, costs, weights, failed)

    new_opt = optimal_sequence(controls, weights, bounds)
    diag = StepDiagnostics(
        min_cost=float(ok_costs.min()),
        mean_cost=float(ok_costs.mean()),
        ess=effective_sample_size(weights),
        solve_ms=1000.0 * (time.perf_counter() - start),
        failures=failures,
    )
    return new_opt[0].copy(), new_opt, diag, RolloutBatch(controls, states, costs, weights, failed)


class MPPIController:
    """Receding-horizon wrapper holding the warm start and the step counter."""

    def __init__(
        self,
        grid: TerrainGrid,
        params: VehicleParams,
        cfg: MPPIConfig,
        model: Optional[ResidualPredictor] = None,
    ):
        self.grid = grid
        self.params = params
        self.cfg = cfg
        self.model = model
        self.step_index = 0
        self.warm_start = np.zeros((cfg.horizon, INPUT_DIM))
        self._executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None

    def set_model(self, model: Optional[ResidualPredictor]) -> None:
        """Swap the model snapshot used by subsequent rollouts."""
        self.model = model

    def reset(self) -> None:
        self.step_index = 0
        self.warm_start = np.zeros((self.cfg.horizon, INPUT_DIM))

    def control(self, x_k, ref_slice) -> Tuple[np.ndarray, StepDiagnostics]:
        u_apply, new_opt, diag, _ = mppi_step(
            x_k,
            ref_slice,
            self.warm_start,
            self.grid,
            self.model,
            self.cfg,
            self.params,
            step=self.step_index,
            executor=self._executor,
        )
        self.warm_start = new_opt if diag.all_failed else shift_warm_start(new_opt)
        self.step_index += 1
        return u_apply, diag

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
