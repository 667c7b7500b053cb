"""
Residual Model

Three independent sparse GP heads for the (v, beta, r) residuals of the
nominal model. Heads share their inducing inputs; when they also share
lengthscales, the kernel correlation rows are computed once per query.

Concurrency: one owner applies `update` in measurement order; rollout workers
read a `snapshot()` taken once per control step.
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from dynamics.single_track import ode_step
from gp.kernels import KernelHyper, correlation_matrix
from gp.sparse_gp import SparseGPHead
from models.config import GPConfig, VehicleParams
from models.state import RESIDUAL_DIM, RESIDUAL_SLICE
from utils.diagnostics import log_event
from utils.exceptions import DimensionMismatch, NonPositiveGain, OutlierRejected

HEAD_NAMES = ("dv", "dbeta", "dr")
DEFAULT_OUTLIER_GATE = (0.5, 0.2, 0.5)


def hypers_from_config(cfg: GPConfig) -> List[KernelHyper]:
    return [
        KernelHyper(tuple(cfg.lengthscales), cfg.signal_variance[i], cfg.noise_variance[i])
        for i in range(RESIDUAL_DIM)
    ]


class ResidualModel:
    """Multi-output residual approximated by one single-output head per component."""

    def __init__(self, heads: Sequence[SparseGPHead]):
        heads = list(heads)
        if len(heads) != RESIDUAL_DIM:
            raise DimensionMismatch(f"Residual model needs {RESIDUAL_DIM} heads, got {len(heads)}")
        base = heads[0].inducing
        for head in heads[1:]:
            if head.inducing.shape != base.shape or not np.array_equal(head.inducing, base):
                raise DimensionMismatch("All heads must share the same inducing inputs")
        self.heads = heads
        self._build_groups()

    @classmethod
    def prior(
        cls,
        inducing: np.ndarray,
        hypers: Sequence[KernelHyper],
        forgetting_factor: float = 1.0,
        rls_noise_variance: Sequence[float] = (1.0, 1.0, 1.0),
    ) -> "ResidualModel":
        heads = [
            SparseGPHead.prior(
                inducing,
                hyper,
                forgetting_factor=forgetting_factor,
                rls_noise_variance=rls_noise_variance[i],
            )
            for i, hyper in enumerate(hypers)
        ]
        return cls(heads)

    @classmethod
    def from_config(cls, inducing: np.ndarray, cfg: GPConfig) -> "ResidualModel":
        return cls.prior(
            inducing,
            hypers_from_config(cfg),
            forgetting_factor=cfg.forgetting_factor,
            rls_noise_variance=cfg.rls_noise_variance,
        )

    @property
    def inducing(self) -> np.ndarray:
        return self.heads[0].inducing

    @property
    def num_inducing(self) -> int:
        return self.heads[0].num_inducing

    def _build_groups(self) -> None:
        # heads with equal lengthscales share exp(-0.5 d^2); sigma_f^2 alpha folded per head
        groups: Dict[Tuple[float, ...], List[int]] = {}
        for i, head in enumerate(self.heads):
            groups.setdefault(head.hyper.lengthscales, []).append(i)
        self._groups = [
            (
                lengthscales,
                indices,
                np.column_stack(
                    [self.heads[i].hyper.signal_variance * self.heads[i].alpha for i in indices]
                ),
            )
            for lengthscales, indices in groups.items()
        ]

    def predict_mean(self, xi: np.ndarray) -> np.ndarray:
        """Residual means, shape (..., 3) for inputs (..., 9)."""
        xi = np.asarray(xi, dtype=float)
        flat = xi.reshape(-1, xi.shape[-1])
        out = np.empty((flat.shape[0], RESIDUAL_DIM))
        for lengthscales, indices, weights in self._groups:
            corr = correlation_matrix(flat, self.inducing, lengthscales)
            out[:, indices] = np.einsum("nm,mk->nk", corr, weights)
        return out.reshape(xi.shape[:-1] + (RESIDUAL_DIM,))

    def predict(self, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Per-head predictive means and variances, each shape (..., 3)."""
        xi = np.asarray(xi, dtype=float)
        flat = xi.reshape(-1, xi.shape[-1])
        means, variances = zip(*(head.predict(flat) for head in self.heads))
        shape = xi.shape[:-1] + (RESIDUAL_DIM,)
        return np.column_stack(means).reshape(shape), np.column_stack(variances).reshape(shape)

    def update(self, xi: np.ndarray, y: np.ndarray) -> List[str]:
        """
        Apply one recursive update to every head.

        A head whose gain breaks down is reset to its prior and the event is
        counted; the other heads are unaffected.

        Returns:
            Names of heads that were reset
        """
        xi = np.asarray(xi, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != RESIDUAL_DIM:
            raise DimensionMismatch(f"Expected {RESIDUAL_DIM} targets, got {y.shape[0]}")
        reset = []
        for name, head, target in zip(HEAD_NAMES, self.heads, y):
            try:
                head.recursive_update(xi, target)
            except NonPositiveGain as e:
                logger.warning(f"Head {name}: {e}; resetting to prior")
                head.reset_to_prior()
                log_event("gain_breakdown_reset", str(e), context={"head": name})
                reset.append(name)
        self._build_groups()
        return reset

    def reset_to_prior(self) -> None:
        for head in self.heads:
            head.reset_to_prior()
        self._build_groups()

    def snapshot(self) -> "ResidualModel":
        """Read-only copy for rollout workers."""
        return ResidualModel([head.copy(read_only=True) for head in self.heads])

    def copy(self) -> "ResidualModel":
        return ResidualModel([head.copy() for head in self.heads])


def residual_target(
    x_k,
    u_k,
    x_next_measured,
    p: VehicleParams,
    dt: float,
    gate: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """
    Measured-minus-nominal residual on (v, beta, r).

    Raises:
        OutlierRejected: Any component exceeds its gate (sample skipped, counted)
    """
    nominal = ode_step(x_k, u_k, p, dt)
    y = (np.asarray(x_next_measured, dtype=float) - nominal)[RESIDUAL_SLICE]
    gate_arr = np.asarray(DEFAULT_OUTLIER_GATE if gate is None else gate, dtype=float)
    if np.any(np.abs(y) > gate_arr):
        log_event("outlier_rejected", f"residual {y.tolist()} exceeds gate")
        raise OutlierRejected(
            f"Residual {np.round(y, 4).tolist()} exceeds gate {gate_arr.tolist()}",
            context={"residual": y.tolist()},
        )
    return y
