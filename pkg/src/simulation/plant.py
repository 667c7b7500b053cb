"""
Synthetic Nonplanar Plant

Ground-truth vehicle for closed-loop evaluation: the nominal single-track
derivative plus terrain couplings from the local roll/pitch, integrated with
RK4 on sub-steps and perturbed by Gaussian process noise on (v, beta, r).

Slope components along and across the heading:
    gamma_h = gamma * cos(psi) - alpha * sin(psi)
    alpha_h = alpha * cos(psi) + gamma * sin(psi)
gamma_h > 0 means the vehicle points uphill.
"""

from typing import Optional

import numpy as np

from dynamics.single_track import clamp_state, rk4, st_derivative
from models.config import PlantConfig, VehicleParams
from models.state import BETA, PSI, R, RESIDUAL_SLICE, V
from terrain.grid import TerrainGrid
from utils.exceptions import OutOfBounds


def slope_components(alpha, gamma, psi):
    """(gamma_h, alpha_h): pitch along the heading and roll across it."""
    c, s = np.cos(psi), np.sin(psi)
    return gamma * c - alpha * s, alpha * c + gamma * s


def coupling_terms(x: np.ndarray, alpha: float, gamma: float, cos_theta: float, pcfg: PlantConfig):
    """Additive (v_dot, beta_dot, r_dot) terrain couplings at state x."""
    gamma_h, alpha_h = slope_components(alpha, gamma, x[PSI])
    g = pcfg.gravity
    dv = -pcfg.k_a * g * np.sin(gamma_h)
    dbeta = pcfg.k_beta * g / max(x[V], pcfg.v_floor) * np.sin(alpha_h)
    dr = pcfg.k_r * x[R] * (1.0 / cos_theta - 1.0)
    return dv, dbeta, dr


def plant_step(
    x,
    u,
    grid: TerrainGrid,
    pcfg: PlantConfig,
    p: VehicleParams,
    dt: float,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Advance the ground-truth plant by one control period.

    Terrain angles are looked up at the start of every sub-step and held
    within it.

    Raises:
        OutOfBounds: The vehicle is outside the terrain grid
    """
    x = np.asarray(x, dtype=float).copy()
    u = np.asarray(u, dtype=float)
    h = dt / pcfg.substeps

    for _ in range(pcfg.substeps):
        _, normal, inside = grid.interpolate(x[:2])
        if not inside:
            raise OutOfBounds(
                f"Vehicle left the terrain at {x[:2].tolist()}",
                context={"position": x[:2].tolist()},
            )
        alpha = float(np.arctan2(normal[1], normal[2]))
        gamma = float(np.arctan2(-normal[0], np.hypot(normal[1], normal[2])))
        cos_theta = float(abs(normal[2]))

        def derivative(s: np.ndarray) -> np.ndarray:
            dx = st_derivative(s, u, p)
            dv, dbeta, dr = coupling_terms(s, alpha, gamma, cos_theta, pcfg)
            dx[V] += dv
            dx[BETA] += dbeta
            dx[R] += dr
            return dx

        x = clamp_state(rk4(derivative, x, h), p)

    std = np.asarray(pcfg.noise_std, dtype=float)
    if rng is not None and np.any(std > 0):
        x[RESIDUAL_SLICE] += rng.normal(0.0, 1.0, size=3) * std
        x[V] = np.clip(x[V], p.v_min, p.v_max)
    return x


class TerrainPlant:
    """Plant with its own seeded noise generator."""

    def __init__(self, grid: TerrainGrid, params: VehicleParams, pcfg: PlantConfig, seed: int = 0):
        self.grid = grid
        self.params = params
        self.pcfg = pcfg
        self.rng = np.random.default_rng(seed)

    def step(self, x, u, dt: float) -> np.ndarray:
        return plant_step(x, u, self.grid, self.pcfg, self.params, dt, self.rng)
