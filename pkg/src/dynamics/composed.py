"""
Composed nonplanar step: nominal single-track integration plus a learned
residual on (v, beta, r) that depends on state, input and terrain roll/pitch.
"""

from typing import Optional, Protocol

import numpy as np

from dynamics.single_track import ode_step
from models.config import VehicleParams
from models.state import BETA, DELTA, PSI, R, RESIDUAL_SLICE, V
from terrain.grid import RollPitch, TerrainGrid, roll_pitch_at
from utils.exceptions import OutOfBounds

GP_INPUT_DIM = 9
GP_INPUT_LABELS = ("psi", "delta", "v", "beta", "r", "a", "v_delta", "alpha", "gamma")


class ResidualPredictor(Protocol):
    """Anything that maps GP inputs (..., 9) to residual means (..., 3)."""

    def predict_mean(self, xi: np.ndarray) -> np.ndarray:
        ...


def wrap_angle(angle):
    """Reduce angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)


def assemble_gp_input(x, u, rp: RollPitch) -> np.ndarray:
    """
    Build xi = [psi, delta, v, beta, r, a, v_delta, alpha, gamma].

    psi is wrapped to (-pi, pi]; the state itself keeps the continuous heading.
    Broadcasts over leading axes.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    alpha = np.asarray(rp.alpha, dtype=float)
    gamma = np.asarray(rp.gamma, dtype=float)
    lead = np.broadcast_shapes(x.shape[:-1], u.shape[:-1], alpha.shape, gamma.shape)

    xi = np.empty(lead + (GP_INPUT_DIM,))
    xi[..., 0] = wrap_angle(x[..., PSI])
    xi[..., 1] = x[..., DELTA]
    xi[..., 2] = x[..., V]
    xi[..., 3] = x[..., BETA]
    xi[..., 4] = x[..., R]
    xi[..., 5:7] = u
    xi[..., 7] = alpha
    xi[..., 8] = gamma
    return xi


def propagate(
    x,
    u,
    rp: RollPitch,
    model: Optional[ResidualPredictor],
    p: VehicleParams,
    dt: float,
    check: bool = True,
) -> np.ndarray:
    """
    ode_step plus the residual mean on (v, beta, r) at known roll/pitch.

    model=None gives the nominal (baseline) step. Speed is clamped again after
    the residual is added, so at v_min or v_max the applied speed residual is
    cut short and the step is not exactly ode_step plus the residual mean.
    """
    x_next = ode_step(x, u, p, dt, check=check)
    if model is None:
        return x_next
    residual = model.predict_mean(assemble_gp_input(x, u, rp))
    x_next[..., RESIDUAL_SLICE] += residual
    x_next[..., V] = np.clip(x_next[..., V], p.v_min, p.v_max)
    return x_next


def composed_step(
    x,
    u,
    grid: TerrainGrid,
    gp: Optional[ResidualPredictor],
    p: VehicleParams,
    dt: float,
) -> np.ndarray:
    """
    x_{k+1} = ode_step(x_k, u_k) + H * GP(xi_k), with H selecting (v, beta, r).

    Raises:
        OutOfBounds: (p_x, p_y) outside the terrain grid
    """
    x = np.asarray(x, dtype=float)
    rp, inside = roll_pitch_at(grid, x[..., :2])
    if not np.all(inside):
        raise OutOfBounds(
            f"Position outside terrain bounds {grid.bounds}",
            context={"position": x[..., :2].tolist()},
        )
    return propagate(x, u, rp, gp, p, dt)
