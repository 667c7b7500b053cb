"""
Exception hierarchy for nptrack.

Every error carries a diagnostic category so the diagnostics reporter and the
command-line layer can classify failures without string matching.
"""

from typing import Any, Dict, Optional

from utils.diagnostics import DiagnosticCategory


class NPTrackError(Exception):
    """Base class for all nptrack errors."""

    category = DiagnosticCategory.SYSTEM

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.context = context or {}


# Terrain


class TerrainError(NPTrackError):
    category = DiagnosticCategory.TERRAIN


class DegenerateCloud(TerrainError):
    """Point cloud is collinear (or too small) in plan view."""


class NonFiniteInput(TerrainError):
    """NaN or infinite coordinates or normals."""


class OutOfBounds(TerrainError):
    """Query position lies outside the grid bounding box."""


class UnknownProfile(TerrainError):
    pass


class InvalidBounds(TerrainError):
    pass


class NonUnitNormal(TerrainError):
    pass


# Dynamics


class NonFiniteState(NPTrackError):
    category = DiagnosticCategory.DYNAMICS


# Learning


class LearningError(NPTrackError):
    category = DiagnosticCategory.LEARNING


class SingularKernelMatrix(LearningError):
    pass


class DimensionMismatch(LearningError):
    pass


class NonPositiveGain(LearningError):
    """RLS innovation gain broke down; the head should be reset to its prior."""


class OutlierRejected(LearningError):
    """Residual target exceeded the outlier gate and was skipped."""


# Control


class AllRolloutsFailed(NPTrackError):
    category = DiagnosticCategory.CONTROL


# Simulation


class UnknownShape(NPTrackError):
    category = DiagnosticCategory.SIMULATION


class TrackDeparture(NPTrackError):
    """Vehicle left the map or the drivable corridor."""

    category = DiagnosticCategory.SIMULATION


# Configuration


class ConfigError(NPTrackError):
    category = DiagnosticCategory.CONFIGURATION
