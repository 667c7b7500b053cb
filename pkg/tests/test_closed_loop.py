#!/usr/bin/env python3
"""
Tests for closed-loop episodes: reproducibility, departures, online learning
isolation and the written run outputs.
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from controllers.reference import ReferenceTrajectory
from gp.residual_model import ResidualModel
from gp.training import prior_inducing_points
from models.config import with_overrides
from pipelines.closed_loop import (
    RUN_COLUMNS,
    ClosedLoopRunner,
    run_closed_loop,
    run_episodes,
    write_run_outputs,
)
from simulation.metrics import SUMMARY_COLUMNS, TIMING_SUMMARY_COLUMNS
from simulation.tracks import generate_track
from terrain.catalog import build_grid_from_catalog
from utils.diagnostics import diagnostics
from utils.exceptions import ConfigError


@pytest.fixture
def small_track(small_config):
    cfg = small_config.track
    return generate_track(cfg.shape, cfg.scale, cfg.profile, small_config.vehicle, cfg)


def test_episodes_are_reproducible(small_config, small_track, tmp_path):
    logs = [
        run_closed_loop(small_track.reference, small_track.grid, "gp_recursive", small_config, seed=1)
        for _ in range(2)
    ]
    pd.testing.assert_frame_equal(logs[0].to_frame(), logs[1].to_frame())
    first = logs[0].to_csv(tmp_path / "a").read_bytes()
    second = logs[1].to_csv(tmp_path / "b").read_bytes()
    assert first == second


def test_episode_log_layout(small_config, small_track):
    log = run_closed_loop(small_track.reference, small_track.grid, "baseline", small_config)
    frame = log.to_frame()
    assert list(frame.columns) == RUN_COLUMNS
    assert len(frame) == small_config.steps
    assert not log.departed and log.departure_reason is None
    np.testing.assert_allclose(frame["time"], np.arange(len(frame)) * small_config.mppi.dt)
    assert frame["gp_dv"].isna().all()
    assert frame["res_dv"].notna().all()
    assert (frame["ess"] >= 1.0).all()


def test_gp_modes_report_predictions(small_config, small_track):
    log = run_closed_loop(small_track.reference, small_track.grid, "gp", small_config)
    frame = log.to_frame()
    assert frame[["gp_dv", "gp_dbeta", "gp_dr"]].notna().all().all()
    assert (frame[["gp_std_dv", "gp_std_dbeta", "gp_std_dr"]] >= 0.0).all().all()


def test_zero_steps_give_an_empty_log(small_config, small_track):
    log = run_closed_loop(small_track.reference, small_track.grid, "baseline", small_config, steps=0)
    assert len(log) == 0
    frame = log.to_frame()
    assert frame.empty and list(frame.columns) == RUN_COLUMNS


def test_online_learning_works_on_a_copy(small_config, small_track):
    inducing = prior_inducing_points(small_config.gp.inducing_points, small_config.vehicle)
    model = ResidualModel.from_config(inducing, small_config.gp)
    log = run_closed_loop(
        small_track.reference, small_track.grid, "gp_recursive", small_config, model=model
    )
    assert len(log) > 0
    assert all(head.updates == 0 for head in model.heads)
    np.testing.assert_array_equal(model.heads[0].mean, np.zeros(model.num_inducing))


def test_overspeed_on_a_short_map_departs(small_config):
    xs = np.linspace(0.0, 3.0, 31)
    track = ReferenceTrajectory.from_polyline(
        np.column_stack([xs, np.zeros_like(xs)]), 1.0, closed=False
    )
    grid = build_grid_from_catalog("flat", None, (-1.0, 3.2, -1.0, 1.0), 0.1)
    cfg = with_overrides(small_config, initial_speed=8.0, steps=200)

    log = run_closed_loop(track, grid, "baseline", cfg)
    assert log.departed
    assert log.departure_reason in {"left_map", "corridor"}
    assert not log.lap_completed
    assert len(log) < 200
    assert diagnostics.count("track_departure") == 1


def test_track_outside_the_grid_is_a_configuration_error(small_config, small_track):
    grid = build_grid_from_catalog("flat", None, (-1.0, 1.0, -1.0, 1.0), 0.25)
    with pytest.raises(ConfigError):
        ClosedLoopRunner(small_track.reference, grid, small_config)


def test_unknown_mode_is_rejected(small_config, small_track):
    runner = ClosedLoopRunner(small_track.reference, small_track.grid, small_config)
    with pytest.raises(ConfigError):
        runner.run("open_loop", 0)


def test_arc_progress_wraps_on_closed_tracks(small_config, small_track):
    runner = ClosedLoopRunner(small_track.reference, small_track.grid, small_config)
    length = small_track.reference.length
    assert runner._arc_delta(length - 0.1, 0.2) == pytest.approx(0.3)
    assert runner._arc_delta(0.2, length - 0.1) == pytest.approx(-0.3)
    assert runner._arc_delta(1.0, 1.5) == pytest.approx(0.5)


def test_episodes_come_back_in_mode_and_seed_order(small_config, small_track):
    cfg = with_overrides(small_config, steps=3)
    logs = run_episodes(
        small_track.reference, small_track.grid, cfg, ["gp_recursive", "baseline"], [4, 2]
    )
    assert [log.name for log in logs] == [
        "gp_recursive_seed4",
        "gp_recursive_seed2",
        "baseline_seed4",
        "baseline_seed2",
    ]
    assert all(len(log) == 3 for log in logs)


def test_run_outputs(small_config, small_track, tmp_path):
    cfg = with_overrides(small_config, steps=5)
    logs = run_episodes(small_track.reference, small_track.grid, cfg, seeds=[0, 1])
    paths = write_run_outputs(logs, tmp_path, bins=6)

    summary = pd.read_csv(paths["summary"])
    assert len(summary) == 4
    assert set(summary["mode"]) == {"baseline", "gp_recursive"}
    by_mode = pd.read_csv(paths["by_mode"])
    assert by_mode["runs"].tolist() == [2, 2]
    for mode in ("baseline", "gp_recursive"):
        hist = pd.read_csv(paths[f"hist_{mode}"])
        assert len(hist) == 6
        assert hist["count"].sum() == 10
        for seed in (0, 1):
            assert (tmp_path / f"run_{mode}_seed{seed}.csv").exists()
            assert (tmp_path / f"timing_{mode}_seed{seed}.csv").exists()

    assert list(summary.columns) == SUMMARY_COLUMNS
    timing = pd.read_csv(paths["timing"])
    assert list(timing.columns) == TIMING_SUMMARY_COLUMNS
    assert len(timing) == 4 and (timing["frequency_hz"] > 0).all()

    rerun = write_run_outputs(
        run_episodes(small_track.reference, small_track.grid, cfg, seeds=[0, 1]), tmp_path / "again", bins=6
    )
    for key in ("summary", "by_mode"):
        assert paths[key].read_bytes() == rerun[key].read_bytes()
