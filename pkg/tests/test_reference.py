#!/usr/bin/env python3
"""
Tests for reference trajectories and tracking metrics.
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from controllers.reference import ReferenceTrajectory, project_onto_polyline
from simulation.metrics import (
    SUMMARY_COLUMNS,
    TIMING_SUMMARY_COLUMNS,
    aggregate_by_mode,
    cross_track_error,
    error_histogram,
    error_statistics,
    summarize_run,
    summarize_timing,
)
from utils.exceptions import InvalidBounds


def _square(side: float = 4.0, spacing: float = 0.5) -> ReferenceTrajectory:
    corners = np.array([[0.0, 0.0], [side, 0.0], [side, side], [0.0, side], [0.0, 0.0]])
    pts = [corners[0]]
    for a, b in zip(corners[:-1], corners[1:]):
        n = int(side / spacing)
        for k in range(1, n + 1):
            pts.append(a + (b - a) * k / n)
    return ReferenceTrajectory.from_polyline(np.array(pts), 2.0, closed=True)


def _line(length: float = 10.0) -> ReferenceTrajectory:
    xs = np.linspace(0.0, length, 11)
    return ReferenceTrajectory.from_polyline(np.column_stack([xs, np.zeros_like(xs)]), 1.5, closed=False)


def test_arc_length_and_headings():
    square = _square()
    assert square.length == pytest.approx(16.0)
    assert square.num_segments == 32
    turns = np.diff(square.headings[::8][:4])
    np.testing.assert_allclose(turns, [0.5 * np.pi] * 3, atol=1e-12)


def test_projection_signs_left_positive():
    line = _line()
    s, cte = line.project(np.array([3.3, 0.4]))
    assert s == pytest.approx(3.3)
    assert cte == pytest.approx(0.4)
    assert line.project(np.array([3.3, -0.4]))[1] == pytest.approx(-0.4)

    k, t, dist = project_onto_polyline(np.array([12.0, 1.0]), line.points)
    assert k == 9 and t == 1.0
    assert abs(dist) == pytest.approx(np.hypot(2.0, 1.0))


def test_projection_hint_limits_the_search_window():
    # two parallel passes 0.5 m apart; without a hint the nearer pass wins
    points = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 0.5], [0.0, 0.5]])
    path = ReferenceTrajectory.from_polyline(points, 1.0, closed=False)
    point = np.array([5.0, 0.3])
    assert path.project(point)[0] == pytest.approx(10.5 + 5.0)
    s, cte = path.project(point, hint=5.0, window=(5.0, 1.0))
    assert s == pytest.approx(5.0)
    assert cte == pytest.approx(0.3)


def test_closed_sampling_wraps_and_unwraps_heading():
    square = _square()
    np.testing.assert_allclose(square.sample(17.0)[0, :2], square.sample(1.0)[0, :2], atol=1e-12)
    assert square.sample(17.0)[0, 3] == pytest.approx(square.sample(1.0)[0, 3] + 2.0 * np.pi)


def test_open_sampling_clamps_to_the_ends():
    line = _line()
    np.testing.assert_allclose(line.sample([-3.0, 25.0])[:, :2], [[0.0, 0.0], [10.0, 0.0]])


def test_slice_advances_at_the_current_speed():
    line = _line()
    ref = line.slice(2.0, horizon=5, dt=0.1, speed=3.0)
    assert ref.shape == (6, 4)
    np.testing.assert_allclose(ref[:, 0], 2.0 + 0.3 * np.arange(6), atol=1e-12)
    np.testing.assert_allclose(ref[:, 2], 1.5)

    slow = line.slice(2.0, horizon=5, dt=0.1, speed=0.0, min_progress_speed=1.0)
    np.testing.assert_allclose(slow[:, 0], 2.0 + 0.1 * np.arange(6), atol=1e-12)


def test_reference_csv_round_trip(tmp_path):
    square = _square()
    loaded = ReferenceTrajectory.from_csv(square.to_csv(tmp_path / "reference.csv"))
    assert loaded.closed
    np.testing.assert_array_equal(loaded.points, square.points)
    np.testing.assert_array_equal(loaded.speeds, square.speeds)
    np.testing.assert_allclose(loaded.headings, square.headings)

    pd.DataFrame({"x": [0.0, 1.0]}).to_csv(tmp_path / "bad.csv", index=False)
    with pytest.raises(InvalidBounds):
        ReferenceTrajectory.from_csv(tmp_path / "bad.csv")


def test_reference_needs_two_points():
    with pytest.raises(InvalidBounds):
        ReferenceTrajectory.from_polyline(np.array([[0.0, 0.0]]), 1.0)


def test_cross_track_error_sign_and_validation():
    path = np.array([[0.0, 0.0], [10.0, 0.0]])
    assert cross_track_error([5.0, 1.0], path) == pytest.approx(1.0)
    assert cross_track_error([5.0, -2.0], path) == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        cross_track_error([0.0, 0.0], path[:1])


def test_cross_track_error_at_a_right_angle_corner_matches_dense_sampling():
    path = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]])
    # both legs sampled every millimetre, corner included
    leg = np.linspace(0.0, 10.0, 10001)
    dense = np.vstack(
        [np.column_stack([leg, np.zeros_like(leg)]), np.column_stack([np.full_like(leg, 10.0), leg])]
    )
    rng = np.random.default_rng(4)
    points = rng.uniform([8.0, -2.0], [12.0, 2.0], size=(300, 2))
    # beyond both legs on the outside the nearest point is the corner itself
    points = points[~((points[:, 0] > 10.0) & (points[:, 1] < 0.0))]
    assert len(points) > 200

    for p in points:
        cte = cross_track_error(p, path)
        oracle = np.min(np.hypot(*(dense - p).T))
        # sampled distance overestimates by at most half the spacing
        assert abs(cte) <= oracle + 1e-12
        assert oracle - abs(cte) <= 5e-4
        if oracle > 0.5:
            assert abs(cte) == pytest.approx(oracle, abs=1e-6)
        inside_turn = p[0] < 10.0 and p[1] > 0.0
        assert (cte > 0.0) == inside_turn


def test_error_statistics():
    assert error_statistics([1.0, -3.0, 2.0]) == pytest.approx((2.0, 2.0, 3.0))
    assert all(np.isnan(v) for v in error_statistics([]))


def test_summary_holds_only_reproducible_metrics():
    row = summarize_run("gp", 3, [0.1, -0.2], False, True)
    assert list(row) == SUMMARY_COLUMNS
    assert row["steps"] == 2
    assert row["max_abs_cte"] == pytest.approx(0.2)
    assert row["departed"] and not row["lap_completed"]
    assert not {"median_solve_ms", "frequency_hz"} & set(row)


def test_timing_summary_reports_frequency_from_median_solve_time():
    row = summarize_timing("gp", 3, [10.0, 20.0, 40.0])
    assert list(row) == TIMING_SUMMARY_COLUMNS
    assert row["median_solve_ms"] == 20.0
    assert row["frequency_hz"] == pytest.approx(50.0)
    assert np.isnan(summarize_timing("gp", 3, [])["frequency_hz"])


def test_aggregate_by_mode_counts_runs():
    rows = [
        summarize_run("baseline", 0, [0.2], True, False),
        summarize_run("baseline", 1, [0.4], False, True),
        summarize_run("gp", 0, [0.1], True, False),
    ]
    table = aggregate_by_mode(pd.DataFrame(rows)).set_index("mode")
    assert table.loc["baseline", "runs"] == 2
    assert table.loc["baseline", "mean_abs_cte"] == pytest.approx(0.3)
    assert table.loc["baseline", "departures"] == 1
    assert table.loc["gp", "laps_completed"] == 1
    assert aggregate_by_mode(pd.DataFrame()).empty


def test_error_histogram_bins_absolute_errors():
    errors = np.array([-0.9, -0.1, 0.1, 0.5, 0.95])
    hist = error_histogram(errors, bins=4, value_range=(0.0, 1.0))
    assert list(hist.columns) == ["bin_lo", "bin_hi", "count"]
    assert hist["count"].tolist() == [2, 0, 1, 2]
    assert len(error_histogram(errors, bins=7)) == 7
    assert error_histogram([], bins=3)["count"].sum() == 0
