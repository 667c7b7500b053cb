"""MPPI tracking controller and its sampling and reference utilities."""

from controllers.mppi import (
    MPPIController,
    RolloutBatch,
    StepDiagnostics,
    importance_weights,
    mppi_step,
    optimal_sequence,
    rollout,
    rollout_batch,
    shift_warm_start,
    trajectory_cost,
)
from controllers.reference import ReferenceTrajectory
from controllers.sampling import sample_controls, truncated_normal

__all__ = [
    "MPPIController",
    "ReferenceTrajectory",
    "RolloutBatch",
    "StepDiagnostics",
    "importance_weights",
    "mppi_step",
    "optimal_sequence",
    "rollout",
    "rollout_batch",
    "sample_controls",
    "shift_warm_start",
    "trajectory_cost",
    "truncated_normal",
]
