#!/usr/bin/env python3
"""
End-to-end tests of the nptrack command line on a small oval track.
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from cli.main import cli
from controllers.reference import ReferenceTrajectory
from gp.dataset import save_dataset
from models.config import dump_run_config, load_run_config
from terrain.catalog import build_grid_from_catalog
from terrain.statistics import read_map_statistics
from terrain.storage import save_grid


@pytest.fixture
def config_file(small_config, tmp_path, monkeypatch):
    monkeypatch.delenv("NPTRACK_WORKERS", raising=False)
    return dump_run_config(small_config, tmp_path / "small.yaml")


def _invoke(config_file, out_dir, *args):
    return CliRunner().invoke(
        cli, ["--config", str(config_file), "--out-dir", str(out_dir), *args], catch_exceptions=False
    )


def test_gen_track_writes_map_files(config_file, tmp_path):
    out = tmp_path / "out"
    result = _invoke(config_file, out, "gen-track")
    assert result.exit_code == 0, result.output
    for name in ("terrain.nptg", "reference.csv", "map_stats.txt", "diagnostics.json"):
        assert (out / name).exists()
    assert "elevation_range_m = 0" in result.output


def test_gen_track_rejects_an_unknown_shape(config_file, tmp_path):
    result = _invoke(config_file, tmp_path / "out", "gen-track", "--shape", "figure_eight")
    assert result.exit_code == 2
    assert "kidney" in result.output


def test_gen_track_amplitude_and_parameters(config_file, tmp_path):
    out = tmp_path / "out"
    result = _invoke(
        config_file, out, "gen-track", "--profile", "tilted_plane", "--amp", "12", "--param", "azimuth_deg=90"
    )
    assert result.exit_code == 0, result.output
    assert "max_slope_deg = 12" in result.output

    bad = _invoke(config_file, out, "gen-track", "--profile", "flat", "--amp", "1")
    assert bad.exit_code == 2
    assert _invoke(config_file, out, "gen-track", "--param", "slope").exit_code == 2


def test_collect_with_zero_duration(config_file, tmp_path):
    out = tmp_path / "out"
    assert _invoke(config_file, out, "gen-track").exit_code == 0
    result = _invoke(config_file, out, "collect", "--duration", "0")
    assert result.exit_code == 0, result.output
    assert "samples = 0" in result.output
    assert (out / "dataset.csv").exists()


def test_collect_uses_the_configured_seed(config_file, small_config, tmp_path):
    out = tmp_path / "out"
    assert _invoke(config_file, out, "gen-track").exit_code == 0
    track_args = ("--terrain", str(out / "terrain.nptg"), "--reference", str(out / "reference.csv"))
    seeded_config = dump_run_config(
        small_config.model_copy(update={"seeds": [3]}), tmp_path / "seeded.yaml"
    )

    from_config = _invoke(seeded_config, tmp_path / "a", "collect", *track_args)
    from_flag = _invoke(config_file, tmp_path / "b", "--seed", "3", "collect", *track_args)
    default = _invoke(config_file, tmp_path / "c", "collect", *track_args)
    for result in (from_config, from_flag, default):
        assert result.exit_code == 0, result.output

    dataset = (tmp_path / "a" / "dataset.csv").read_bytes()
    assert dataset == (tmp_path / "b" / "dataset.csv").read_bytes()
    assert dataset != (tmp_path / "c" / "dataset.csv").read_bytes()


def test_collect_needs_a_track(config_file, tmp_path):
    assert _invoke(config_file, tmp_path / "empty", "collect").exit_code == 2


def test_fit_gp_without_dataset_fails(config_file, tmp_path):
    result = _invoke(config_file, tmp_path / "out", "fit-gp")
    assert result.exit_code == 2
    assert "Dataset not found" in result.output


def test_fit_gp_saves_a_model(config_file, tmp_path):
    out = tmp_path / "out"
    rng = np.random.default_rng(0)
    inputs = rng.uniform(-1.0, 1.0, (60, 9))
    targets = 0.01 * rng.normal(size=(60, 3))
    save_dataset(inputs, targets, out / "dataset.csv")

    result = _invoke(config_file, out, "fit-gp", "-M", "10")
    assert result.exit_code == 0, result.output
    assert (out / "gp_model.npgp").exists()
    for name in ("dv", "dbeta", "dr"):
        assert f"rmse_{name} = " in result.output


@pytest.mark.slow
def test_run_and_plot(config_file, tmp_path):
    out = tmp_path / "out"
    assert _invoke(config_file, out, "gen-track").exit_code == 0
    args = ("run", "--mode", "baseline", "--mode", "gp_recursive", "--seeds", "2", "--steps", "5")
    result = _invoke(config_file, out, *args)
    assert result.exit_code == 0, result.output

    summary = pd.read_csv(out / "summary.csv")
    assert len(summary) == 4
    assert sorted(summary["seed"].unique()) == [0, 1]

    again = tmp_path / "again"
    rerun = _invoke(
        config_file,
        again,
        *args,
        "--terrain",
        str(out / "terrain.nptg"),
        "--reference",
        str(out / "reference.csv"),
    )
    assert rerun.exit_code == 0, rerun.output
    reproducible = (
        "run_baseline_seed0.csv",
        "run_gp_recursive_seed1.csv",
        "summary.csv",
        "summary_by_mode.csv",
    )
    for name in reproducible:
        assert (out / name).read_bytes() == (again / name).read_bytes()

    plotted = _invoke(config_file, out, "plot", "--bins", "7")
    assert plotted.exit_code == 0, plotted.output
    assert (out / "plots" / "trajectories.png").exists()
    for mode in ("baseline", "gp_recursive"):
        assert len(pd.read_csv(out / "plots" / f"cte_histogram_{mode}.csv")) == 7


def test_plot_without_runs_fails(config_file, tmp_path):
    assert _invoke(config_file, tmp_path / "empty", "plot").exit_code == 2


def test_dump_config_round_trip(config_file, small_config, tmp_path):
    dumped = tmp_path / "resolved.yaml"
    result = _invoke(config_file, tmp_path / "out", "--seed", "5", "--dump-config", str(dumped))
    assert result.exit_code == 0, result.output
    loaded = load_run_config(dumped)
    assert loaded.seeds == [5]
    assert loaded.model_copy(update={"seeds": small_config.seeds}).model_dump() == small_config.model_dump()


def test_worker_count_from_environment(config_file, tmp_path, monkeypatch):
    dumped = tmp_path / "resolved.yaml"
    monkeypatch.setenv("NPTRACK_WORKERS", "3")
    assert _invoke(config_file, tmp_path / "out", "--dump-config", str(dumped)).exit_code == 0
    assert load_run_config(dumped).mppi.workers == 3

    monkeypatch.setenv("NPTRACK_WORKERS", "many")
    assert _invoke(config_file, tmp_path / "out", "--dump-config", str(dumped)).exit_code == 2


def test_invalid_config_exits_with_usage_error(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("vehicle:\n  mass: 1.0\nunexpected: true\n")
    result = CliRunner().invoke(cli, ["--config", str(bad), "--out-dir", str(tmp_path / "out"), "gen-track"])
    assert result.exit_code == 2


def test_hilly_kidney_has_slope(config_file, tmp_path):
    result = _invoke(
        config_file,
        tmp_path / "out",
        "gen-track",
        "--shape",
        "kidney",
        "--profile",
        "sinusoidal_hills",
        "--amp",
        "2",
    )
    assert result.exit_code == 0, result.output
    stats = read_map_statistics(tmp_path / "out" / "map_stats.txt")
    assert stats["max_slope_deg"] > 0.0


def test_fit_gp_on_a_degenerate_dataset_is_a_runtime_failure(config_file, tmp_path):
    out = tmp_path / "out"
    save_dataset(np.zeros((1, 9)), np.zeros((1, 3)), out / "dataset.csv")
    assert _invoke(config_file, out, "fit-gp").exit_code == 3


def test_collect_departing_immediately_is_a_runtime_failure(config_file, tmp_path):
    out = tmp_path / "out"
    save_grid(build_grid_from_catalog("flat", None, (-0.05, 0.05, -0.05, 0.05), 0.025), out / "terrain.nptg")
    xs = np.linspace(0.0, 3.0, 31)
    ReferenceTrajectory.from_polyline(
        np.column_stack([xs, np.zeros_like(xs)]), 8.0, closed=False
    ).to_csv(out / "reference.csv")
    result = _invoke(config_file, out, "collect")
    assert result.exit_code == 3
    assert "TrackDeparture" in result.output
