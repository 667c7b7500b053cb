"""
Shared fixtures: the 1:10 vehicle from config/nptrack.yaml, flat and tilted
terrain grids, and a small run configuration that keeps closed-loop tests fast.
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from models.config import RunConfig, VehicleParams  # noqa: E402
from terrain.catalog import build_grid_from_catalog  # noqa: E402
from utils.diagnostics import diagnostics  # noqa: E402

VEHICLE = {
    "mass": 3.74,
    "yaw_inertia": 0.04712,
    "l_f": 0.15875,
    "l_r": 0.17145,
    "cog_height": 0.074,
    "cornering_stiffness_front": 4.718,
    "cornering_stiffness_rear": 5.4562,
    "friction": 1.0489,
    "steer_min": -0.4189,
    "steer_max": 0.4189,
    "steer_rate_min": -3.2,
    "steer_rate_max": 3.2,
    "v_min": 0.0,
    "v_max": 8.0,
    "accel_min": -6.0,
    "accel_max": 6.0,
}

SMALL_RUN = {
    "vehicle": VEHICLE,
    "track": {"shape": "oval", "scale": 0.3, "profile": "flat", "margin": 3.0},
    "mppi": {
        "horizon": 5,
        "samples": 32,
        "temperature": 1.0,
        "sigma": [1.5, 1.0],
        "r": [0.05, 0.05],
        "r_d": [0.5, 0.5],
    },
    "gp": {"inducing_points": 5},
    "collect": {"duration": 0.4},
    "modes": ["baseline", "gp_recursive"],
    "seeds": [0],
    "steps": 15,
}


@pytest.fixture
def vehicle() -> VehicleParams:
    return VehicleParams(**VEHICLE)


@pytest.fixture
def small_config() -> RunConfig:
    return RunConfig.model_validate(SMALL_RUN)


@pytest.fixture
def flat_grid():
    return build_grid_from_catalog("flat", None, (-20.0, 20.0, -20.0, 20.0), 0.5)


@pytest.fixture
def tilted_grid():
    """10 degree plane rising towards +x."""
    return build_grid_from_catalog(
        "tilted_plane", {"slope_deg": 10.0, "azimuth_deg": 0.0}, (-20.0, 20.0, -20.0, 20.0), 0.5
    )


@pytest.fixture(autouse=True)
def clean_diagnostics():
    diagnostics.reset()
    yield
    diagnostics.reset()
