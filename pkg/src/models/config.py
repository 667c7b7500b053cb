"""
Run configuration schema.

All sections are pydantic models that reject unknown keys. Physical vehicle
parameters have no defaults: a configuration file must state every one of them.
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from utils.exceptions import ConfigError

CONTROLLER_MODES = ("baseline", "gp", "gp_recursive")
TRACK_SHAPES = ("kidney", "l_shape", "oval")
TERRAIN_PROFILES = ("flat", "tilted_plane", "sinusoidal_hills", "banked_ring", "crater")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class VehicleParams(_Section):
    """Single-track vehicle parameters; forces per unit load (linear tire model)."""

    mass: float = Field(gt=0)
    yaw_inertia: float = Field(gt=0)
    l_f: float = Field(gt=0, description="CoG to front axle [m]")
    l_r: float = Field(gt=0, description="CoG to rear axle [m]")
    cog_height: float = Field(gt=0)
    cornering_stiffness_front: float = Field(gt=0, description="[1/rad]")
    cornering_stiffness_rear: float = Field(gt=0, description="[1/rad]")
    friction: float = Field(gt=0)
    steer_min: float
    steer_max: float
    steer_rate_min: float
    steer_rate_max: float
    v_min: float = Field(ge=0)
    v_max: float = Field(gt=0)
    accel_min: float
    accel_max: float

    @model_validator(mode="after")
    def _check_bounds(self):
        for lo, hi in (
            ("steer_min", "steer_max"),
            ("steer_rate_min", "steer_rate_max"),
            ("v_min", "v_max"),
            ("accel_min", "accel_max"),
        ):
            if getattr(self, lo) >= getattr(self, hi):
                raise ValueError(f"{lo} must be below {hi}")
        return self

    @property
    def wheelbase(self) -> float:
        return self.l_f + self.l_r


class MPPIConfig(_Section):
    horizon: int = Field(default=20, ge=1)
    samples: int = Field(default=1024, ge=1)
    temperature: float = Field(default=0.01, gt=0)
    sigma: List[float] = Field(default=[0.5, 0.5], min_length=2, max_length=2)
    # weights on (p_x, p_y, v, psi)
    q: List[float] = Field(default=[20.0, 20.0, 2.0, 5.0], min_length=4, max_length=4)
    r: List[float] = Field(default=[0.1, 0.1], min_length=2, max_length=2)
    r_d: List[float] = Field(default=[1.0, 1.0], min_length=2, max_length=2)
    q_terminal: Optional[List[float]] = Field(default=None, min_length=4, max_length=4)
    dt: float = Field(default=0.02, gt=0)
    seed: int = 0
    failure_cost: float = Field(default=1e6, ge=0)
    workers: int = Field(default=1, ge=1)
    min_progress_speed: float = Field(default=1.0, ge=0)
    input_min: Optional[List[float]] = Field(default=None, min_length=2, max_length=2)
    input_max: Optional[List[float]] = Field(default=None, min_length=2, max_length=2)

    @model_validator(mode="after")
    def _check_weights(self):
        if any(s <= 0 for s in self.sigma):
            raise ValueError("sigma entries must be positive")
        weights = self.q + self.r + self.r_d + (self.q_terminal or [])
        if any(w < 0 for w in weights):
            raise ValueError("cost weights must be non-negative")
        return self

    def terminal_weights(self) -> np.ndarray:
        if self.q_terminal is None:
            return 5.0 * np.asarray(self.q, dtype=float)
        return np.asarray(self.q_terminal, dtype=float)

    def input_box(self, params: VehicleParams) -> Tuple[np.ndarray, np.ndarray]:
        """Admissible input box as (lower, upper) arrays over (a, v_delta)."""
        lo = self.input_min or [params.accel_min, params.steer_rate_min]
        hi = self.input_max or [params.accel_max, params.steer_rate_max]
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


class GPConfig(_Section):
    inducing_points: int = Field(default=30, ge=1)
    forgetting_factor: float = Field(default=0.999, gt=0, le=1)
    # order: psi, delta, v, beta, r, a, v_delta, alpha, gamma
    lengthscales: List[float] = Field(
        default=[3.0, 0.4, 2.0, 0.2, 2.0, 2.0, 2.0, 0.2, 0.2],
        min_length=9,
        max_length=9,
    )
    # per head: (dv, dbeta, dr)
    signal_variance: List[float] = Field(
        default=[2.5e-3, 2.5e-4, 2.5e-3], min_length=3, max_length=3
    )
    noise_variance: List[float] = Field(
        default=[4e-4, 2.5e-5, 1e-4], min_length=3, max_length=3
    )
    rls_noise_variance: List[float] = Field(
        default=[1.0, 1.0, 1.0], min_length=3, max_length=3
    )
    outlier_gate: List[float] = Field(default=[0.5, 0.2, 0.5], min_length=3, max_length=3)
    grid_search: bool = False
    grid_search_subsample: int = Field(default=500, ge=2)
    kmeans_seed: int = 0
    model_path: Optional[str] = None

    @model_validator(mode="after")
    def _check_positive(self):
        values = (
            self.lengthscales
            + self.signal_variance
            + self.noise_variance
            + self.rls_noise_variance
            + self.outlier_gate
        )
        if any(not np.isfinite(v) or v <= 0 for v in values):
            raise ValueError("GP hyperparameters and gates must be positive and finite")
        return self


class PlantConfig(_Section):
    gravity: float = Field(default=9.81, gt=0)
    k_a: float = 1.0
    k_beta: float = 1.0
    k_r: float = 0.3
    noise_std: List[float] = Field(
        default=[0.02, 0.005, 0.01], min_length=3, max_length=3
    )
    # plant dt = control dt / substeps; with zero couplings the plant equals the
    # nominal step only at substeps=1, otherwise they differ by RK4 step-splitting error
    substeps: int = Field(default=10, ge=1)
    v_floor: float = Field(default=1.0, gt=0)
    corridor_half_width: float = Field(default=2.0, gt=0)

    @model_validator(mode="after")
    def _check_noise(self):
        if any(s < 0 for s in self.noise_std):
            raise ValueError("noise_std entries must be non-negative")
        for gain in (self.k_a, self.k_beta, self.k_r):
            if not np.isfinite(gain):
                raise ValueError("coupling gains must be finite")
        return self


class TrackConfig(_Section):
    shape: Literal["kidney", "l_shape", "oval"] = "oval"
    scale: float = Field(default=1.0, gt=0)
    profile: Literal[
        "flat", "tilted_plane", "sinusoidal_hills", "banked_ring", "crater"
    ] = "flat"
    profile_params: Dict[str, float] = Field(default_factory=dict)
    spacing: float = Field(default=0.25, gt=0)
    margin: float = Field(default=4.0, ge=0)
    point_spacing: float = Field(default=0.1, gt=0)
    max_speed: float = Field(default=3.0, gt=0)
    lateral_accel_factor: float = Field(default=0.6, gt=0)


class CollectConfig(_Section):
    duration: float = Field(default=60.0, ge=0)
    excitation_fraction: float = Field(default=0.3, ge=0, le=1)


class RunConfig(_Section):
    vehicle: VehicleParams
    track: TrackConfig = Field(default_factory=TrackConfig)
    mppi: MPPIConfig = Field(default_factory=MPPIConfig)
    gp: GPConfig = Field(default_factory=GPConfig)
    plant: PlantConfig = Field(default_factory=PlantConfig)
    collect: CollectConfig = Field(default_factory=CollectConfig)
    modes: List[Literal["baseline", "gp", "gp_recursive"]] = Field(
        default=["baseline", "gp_recursive"]
    )
    seeds: List[int] = Field(default=[0], min_length=1)
    steps: int = Field(default=1500, ge=0)
    initial_speed: Optional[float] = Field(default=None, ge=0)
    output_dir: str = "runs"


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    Load and validate a YAML run configuration.

    Raises:
        ConfigError: File missing, not a mapping, or failing schema validation
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"Config {path} must contain a mapping at top level")
    cfg = parse_run_config(raw)
    logger.debug(f"Loaded run configuration from {path}")
    return cfg


def parse_run_config(raw: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid run configuration: {e}") from e


def dump_run_config(cfg: RunConfig, path: Union[str, Path]) -> Path:
    """Write the configuration as YAML; the file re-parses to an equal RunConfig."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(cfg.model_dump(mode="json"), f, sort_keys=False)
    return path


def with_overrides(cfg: RunConfig, section: Optional[str] = None, **values) -> RunConfig:
    """Return a re-validated copy with top-level or per-section overrides."""
    data = cfg.model_dump(mode="json")
    clean = {k: v for k, v in values.items() if v is not None}
    if section is None:
        data.update(clean)
    else:
        data[section] = {**data[section], **clean}
    return parse_run_config(data)
