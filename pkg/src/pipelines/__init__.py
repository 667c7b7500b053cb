"""
nptrack - Processing Pipelines

Offline data collection and closed-loop evaluation runs.
"""

from pipelines.closed_loop import (
    ClosedLoopRunner,
    RunLog,
    StepRecord,
    run_closed_loop,
    run_episodes,
    write_run_outputs,
)
from pipelines.collection import CollectedData, collect_dataset

__all__ = [
    "ClosedLoopRunner",
    "CollectedData",
    "RunLog",
    "StepRecord",
    "collect_dataset",
    "run_closed_loop",
    "run_episodes",
    "write_run_outputs",
]
