#!/usr/bin/env python3
"""
Tests for track centerlines, the curvature-capped speed profile and
generated track/terrain pairs.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from models.config import TrackConfig
from simulation.tracks import centerline, curvature, generate_track, resample_closed, speed_profile
from utils.exceptions import UnknownProfile, UnknownShape


def _signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


@pytest.mark.parametrize("shape", ["kidney", "l_shape", "oval"])
def test_centerlines_are_closed_counter_clockwise_and_evenly_spaced(shape):
    points = centerline(shape, scale=0.5, spacing=0.2)
    np.testing.assert_array_equal(points[0], points[-1])
    assert _signed_area(points) > 0.0
    steps = np.hypot(*np.diff(points, axis=0).T)
    assert steps.max() <= 0.2 + 1e-9


def test_centerline_scales_linearly():
    small = centerline("oval", scale=0.5, spacing=0.1)
    large = centerline("oval", scale=1.0, spacing=0.1)
    assert _signed_area(large) == pytest.approx(4.0 * _signed_area(small), rel=1e-3)


def test_unknown_shape_and_bad_scale():
    with pytest.raises(UnknownShape) as exc:
        centerline("figure_eight")
    assert "kidney" in str(exc.value)
    with pytest.raises(ValueError):
        centerline("oval", scale=0.0)


def test_resample_closes_an_open_ring():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    ring = resample_closed(square, 0.25)
    assert len(ring) == 17
    np.testing.assert_array_equal(ring[0], ring[-1])


def test_curvature_of_a_circle():
    phi = np.linspace(0.0, 2.0 * np.pi, 361)
    circle = 5.0 * np.column_stack([np.cos(phi), np.sin(phi)])
    circle[-1] = circle[0]
    np.testing.assert_allclose(curvature(circle), 0.2, rtol=1e-6)


def test_speed_profile_respects_the_cap_and_lateral_limit():
    points = centerline("oval", scale=1.0, spacing=0.1)
    speeds = speed_profile(points, max_speed=3.0, friction=1.0, lateral_factor=0.6)
    assert np.all(speeds <= 3.0) and np.all(speeds > 0.0)
    # the straights run at the cap
    assert np.isclose(speeds, 3.0).mean() > 0.2

    phi = np.linspace(0.0, 2.0 * np.pi, 361)
    circle = 5.0 * np.column_stack([np.cos(phi), np.sin(phi)])
    circle[-1] = circle[0]
    limited = speed_profile(circle, max_speed=100.0, friction=0.8, lateral_factor=0.6)
    np.testing.assert_allclose(limited, np.sqrt(0.6 * 0.8 * 9.81 * 5.0), rtol=1e-6)


def test_flat_track_has_no_relief(vehicle):
    track = generate_track("oval", 0.3, "flat", vehicle, TrackConfig(margin=3.0))
    assert track.reference.closed
    assert np.all(track.grid.contains(track.reference.points))
    assert track.statistics["elevation_range_m"] == 0.0
    assert track.statistics["max_slope_deg"] == 0.0
    x_min, x_max, y_min, y_max = track.grid.bounds
    assert x_min <= track.reference.points[:, 0].min() - 3.0 + 1e-9
    assert y_max >= track.reference.points[:, 1].max() + 3.0 - 1e-9


def test_hilly_and_banked_tracks_have_relief(vehicle):
    hills = generate_track("kidney", 0.5, "sinusoidal_hills", vehicle, TrackConfig(spacing=0.5))
    assert hills.statistics["max_slope_deg"] > 0.0
    banked = generate_track("oval", 0.5, "banked_ring", vehicle, TrackConfig(spacing=0.5))
    assert banked.statistics["elevation_range_m"] > 0.0


def test_profile_parameters_override_the_catalog(vehicle):
    gentle = generate_track(
        "oval", 0.3, "tilted_plane", vehicle, TrackConfig(spacing=0.5), {"slope_deg": 5.0}
    )
    steep = generate_track(
        "oval", 0.3, "tilted_plane", vehicle, TrackConfig(spacing=0.5), {"slope_deg": 15.0}
    )
    assert gentle.statistics["max_slope_deg"] == pytest.approx(5.0, abs=1e-6)
    assert steep.statistics["max_slope_deg"] == pytest.approx(15.0, abs=1e-6)


def test_unknown_profile_is_rejected(vehicle):
    with pytest.raises(UnknownProfile):
        generate_track("oval", 0.3, "mountains", vehicle)
