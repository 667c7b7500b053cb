"""Synthetic plant, track generation and tracking metrics."""

from simulation.metrics import cross_track_error, error_histogram, summarize_run, summarize_timing
from simulation.plant import TerrainPlant, plant_step
from simulation.tracks import GeneratedTrack, centerline, generate_track

__all__ = [
    "GeneratedTrack",
    "TerrainPlant",
    "centerline",
    "cross_track_error",
    "error_histogram",
    "generate_track",
    "plant_step",
    "summarize_run",
    "summarize_timing",
]
