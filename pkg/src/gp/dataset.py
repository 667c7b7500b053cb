"""
Offline residual dataset: plain-text rows of 9 GP inputs followed by 3
residual targets, '#' comments ignored.
"""

from pathlib import Path
from typing import Tuple, Union

import numpy as np
from loguru import logger

from dynamics.composed import GP_INPUT_DIM, GP_INPUT_LABELS
from gp.residual_model import HEAD_NAMES
from models.state import RESIDUAL_DIM
from utils.exceptions import DimensionMismatch

COLUMNS = GP_INPUT_LABELS + HEAD_NAMES


def save_dataset(inputs: np.ndarray, targets: np.ndarray, path: Union[str, Path]) -> Path:
    inputs = np.asarray(inputs, dtype=float).reshape(-1, GP_INPUT_DIM)
    targets = np.asarray(targets, dtype=float).reshape(-1, RESIDUAL_DIM)
    if inputs.shape[0] != targets.shape[0]:
        raise DimensionMismatch(f"{inputs.shape[0]} inputs but {targets.shape[0]} targets")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.hstack([inputs, targets]), fmt="%.17g", header=" ".join(COLUMNS))
    logger.info(f"Saved {inputs.shape[0]} residual samples to {path}")
    return path


def load_dataset(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns:
        (inputs (N, 9), targets (N, 3)); an empty file gives N = 0
    """
    data = np.loadtxt(path, comments="#", ndmin=2, dtype=float)
    if data.size == 0:
        return np.zeros((0, GP_INPUT_DIM)), np.zeros((0, RESIDUAL_DIM))
    if data.shape[1] != GP_INPUT_DIM + RESIDUAL_DIM:
        raise DimensionMismatch(
            f"Dataset rows need {GP_INPUT_DIM + RESIDUAL_DIM} columns, found {data.shape[1]}"
        )
    return data[:, :GP_INPUT_DIM], data[:, GP_INPUT_DIM:]
