#!/usr/bin/env python3
"""
Tests for run configuration loading, validation and overrides.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from conftest import SMALL_RUN, VEHICLE
from models.config import (
    MPPIConfig,
    dump_run_config,
    load_run_config,
    parse_run_config,
    with_overrides,
)
from utils.exceptions import ConfigError

DEFAULT_CONFIG = Path(__file__).parent.parent / "config" / "nptrack.yaml"


def test_default_config_loads():
    cfg = load_run_config(DEFAULT_CONFIG)
    assert cfg.vehicle.mass == pytest.approx(3.74)
    assert cfg.modes == ["baseline", "gp", "gp_recursive"]
    assert cfg.mppi.samples == 1024 and cfg.mppi.horizon == 20
    assert cfg.track.profile == "sinusoidal_hills"
    assert cfg.vehicle.wheelbase == pytest.approx(0.15875 + 0.17145)


def test_vehicle_fields_are_required():
    partial = {k: v for k, v in VEHICLE.items() if k != "mass"}
    with pytest.raises(ConfigError):
        parse_run_config({"vehicle": partial})


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError):
        parse_run_config({**SMALL_RUN, "colour": "red"})
    with pytest.raises(ConfigError):
        parse_run_config({**SMALL_RUN, "mppi": {"horizon": 5, "lambda": 1.0}})


def test_inverted_vehicle_bounds_are_rejected():
    with pytest.raises(ConfigError):
        parse_run_config({"vehicle": {**VEHICLE, "steer_min": 0.5}})


def test_invalid_sections_are_rejected():
    with pytest.raises(ConfigError):
        parse_run_config({**SMALL_RUN, "mppi": {"sigma": [0.5, 0.0]}})
    with pytest.raises(ConfigError):
        parse_run_config({**SMALL_RUN, "gp": {"forgetting_factor": 1.5}})
    with pytest.raises(ConfigError):
        parse_run_config({**SMALL_RUN, "modes": ["baseline", "open_loop"]})
    with pytest.raises(ConfigError):
        parse_run_config({**SMALL_RUN, "plant": {"noise_std": [0.1, -0.1, 0.0]}})
    with pytest.raises(ConfigError):
        parse_run_config({**SMALL_RUN, "seeds": []})


def test_unreadable_files_are_configuration_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.yaml")
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_run_config(listing)


def test_dump_and_reload_is_lossless(small_config, tmp_path):
    path = dump_run_config(small_config, tmp_path / "nested" / "cfg.yaml")
    assert load_run_config(path).model_dump() == small_config.model_dump()


def test_overrides_revalidate_and_skip_none(small_config):
    updated = with_overrides(small_config, "mppi", horizon=7, samples=None)
    assert updated.mppi.horizon == 7
    assert updated.mppi.samples == small_config.mppi.samples
    assert small_config.mppi.horizon == 5
    assert with_overrides(small_config, steps=3, seeds=[4, 5]).seeds == [4, 5]
    with pytest.raises(ConfigError):
        with_overrides(small_config, "mppi", horizon=0)


def test_terminal_weights_default_to_five_times_stage_weights():
    cfg = MPPIConfig()
    np.testing.assert_allclose(cfg.terminal_weights(), 5.0 * np.asarray(cfg.q))
    explicit = MPPIConfig(q_terminal=[1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(explicit.terminal_weights(), [1.0, 2.0, 3.0, 4.0])


def test_input_box_defaults_to_vehicle_limits(vehicle):
    lower, upper = MPPIConfig().input_box(vehicle)
    np.testing.assert_array_equal(lower, [vehicle.accel_min, vehicle.steer_rate_min])
    np.testing.assert_array_equal(upper, [vehicle.accel_max, vehicle.steer_rate_max])
    lower, upper = MPPIConfig(input_min=[-1.0, -1.0], input_max=[1.0, 2.0]).input_box(vehicle)
    np.testing.assert_array_equal(upper, [1.0, 2.0])
