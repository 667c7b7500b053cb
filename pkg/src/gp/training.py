"""
Offline training of the residual model.

Inducing inputs are k-means centroids snapped to the nearest training input.
Hyperparameters come from the configuration, optionally refined by a coarse
log-grid search scored with the exact GP log marginal likelihood on a
subsample.
"""

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from sklearn.cluster import KMeans
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import RBF, ConstantKernel, WhiteKernel
from sklearn.metrics import mean_squared_error, pairwise_distances_argmin_min
from sklearn.model_selection import train_test_split

from gp.kernels import KernelHyper
from gp.residual_model import HEAD_NAMES, ResidualModel, hypers_from_config
from gp.sparse_gp import batch_fit
from models.config import GPConfig, VehicleParams
from models.state import RESIDUAL_DIM
from utils.exceptions import DimensionMismatch

LENGTHSCALE_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)
VARIANCE_FACTORS = (0.1, 1.0, 10.0)


@dataclass
class FitReport:
    model: ResidualModel
    hypers: List[KernelHyper]
    rmse: Dict[str, float] = field(default_factory=dict)
    n_train: int = 0
    n_test: int = 0


def select_inducing_points(
    inputs: np.ndarray,
    num_inducing: int,
    lengthscales: Optional[np.ndarray] = None,
    seed: int = 0,
) -> np.ndarray:
    """
    k-means centroids (in lengthscale-scaled coordinates) snapped to data.

    With num_inducing >= N every training input becomes an inducing input.
    """
    inputs = np.asarray(inputs, dtype=float)
    n = inputs.shape[0]
    if n == 0:
        raise DimensionMismatch("Cannot select inducing points from an empty dataset")
    if num_inducing >= n:
        return inputs.copy()

    scale = np.ones(inputs.shape[1]) if lengthscales is None else np.asarray(lengthscales)
    scaled = np.ascontiguousarray(inputs / scale)
    kmeans = KMeans(n_clusters=num_inducing, n_init=10, random_state=seed).fit(scaled)
    indices, _ = pairwise_distances_argmin_min(kmeans.cluster_centers_, scaled)
    indices = np.unique(indices)
    if len(indices) < num_inducing:
        logger.warning(f"{num_inducing - len(indices)} centroids snapped to shared inputs")
    return inputs[indices]


def prior_inducing_points(
    num_inducing: int,
    params: VehicleParams,
    lengthscales: Optional[np.ndarray] = None,
    seed: int = 0,
    draws: int = 2000,
) -> np.ndarray:
    """
    Inducing inputs for a model learned from scratch: k-means centroids of
    uniform draws over the plausible operating box.
    """
    rng = np.random.default_rng(seed)
    low = np.array(
        [-np.pi, params.steer_min, params.v_min, -0.2, -2.0,
         params.accel_min, params.steer_rate_min, -0.3, -0.3]
    )
    high = np.array(
        [np.pi, params.steer_max, params.v_max, 0.2, 2.0,
         params.accel_max, params.steer_rate_max, 0.3, 0.3]
    )
    samples = rng.uniform(low, high, size=(draws, len(low)))
    return select_inducing_points(samples, num_inducing, lengthscales, seed)


def log_marginal_likelihood(inputs: np.ndarray, targets: np.ndarray, hyper: KernelHyper) -> float:
    """Exact GP log marginal likelihood with fixed hyperparameters."""
    kernel = ConstantKernel(hyper.signal_variance, constant_value_bounds="fixed") * RBF(
        length_scale=hyper.lengthscale_array, length_scale_bounds="fixed"
    ) + WhiteKernel(hyper.noise_variance, noise_level_bounds="fixed")
    gpr = GaussianProcessRegressor(kernel=kernel, optimizer=None, alpha=1e-10)
    gpr.fit(inputs, targets)
    return float(gpr.log_marginal_likelihood_value_)


def grid_search_hyper(
    inputs: np.ndarray,
    targets: np.ndarray,
    base: KernelHyper,
    subsample: int = 500,
    seed: int = 0,
) -> Tuple[KernelHyper, float]:
    """Scale (shared lengthscale factor, sigma_f^2, sigma_eps^2) over a log grid."""
    rng = np.random.default_rng(seed)
    if inputs.shape[0] > subsample:
        pick = np.sort(rng.choice(inputs.shape[0], size=subsample, replace=False))
        inputs, targets = inputs[pick], targets[pick]

    best, best_score = base, -np.inf
    for ell_f, sf_f, sn_f in itertools.product(
        LENGTHSCALE_FACTORS, VARIANCE_FACTORS, VARIANCE_FACTORS
    ):
        candidate = KernelHyper(
            tuple(ell_f * base.lengthscale_array),
            sf_f * base.signal_variance,
            sn_f * base.noise_variance,
        )
        score = log_marginal_likelihood(inputs, targets, candidate)
        if score > best_score:
            best, best_score = candidate, score
    logger.debug(f"Grid search best LML {best_score:.3f}")
    return best, best_score


def fit_residual_model(
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: GPConfig,
    hypers: Optional[List[KernelHyper]] = None,
    inducing: Optional[np.ndarray] = None,
) -> ResidualModel:
    """
    Batch-fit all three heads on a shared inducing set.

    Raises:
        DimensionMismatch: Empty dataset or mismatched shapes
    """
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float).reshape(-1, RESIDUAL_DIM)
    if inputs.shape[0] != targets.shape[0]:
        raise DimensionMismatch(f"{inputs.shape[0]} inputs but {targets.shape[0]} targets")
    hypers = hypers or hypers_from_config(cfg)
    if inducing is None:
        inducing = select_inducing_points(
            inputs, cfg.inducing_points, hypers[0].lengthscale_array, cfg.kmeans_seed
        )
    heads = [
        batch_fit(
            inputs,
            targets[:, i],
            inducing,
            hypers[i],
            forgetting_factor=cfg.forgetting_factor,
            rls_noise_variance=cfg.rls_noise_variance[i],
        )
        for i in range(RESIDUAL_DIM)
    ]
    return ResidualModel(heads)


def train_residual_model(
    inputs: np.ndarray, targets: np.ndarray, cfg: GPConfig, test_size: float = 0.2
) -> FitReport:
    """
    Fit the residual model and report held-out RMSE per head.

    RMSE comes from a model fitted on an 80/20 split; the returned model is
    refitted on all data.

    Raises:
        DimensionMismatch: Fewer samples than inducing points or fewer than 2 samples
    """
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float).reshape(-1, RESIDUAL_DIM)
    n = inputs.shape[0]
    if n < 2 or cfg.inducing_points > n:
        raise DimensionMismatch(
            f"Degenerate dataset: {n} samples for {cfg.inducing_points} inducing points"
        )

    hypers = hypers_from_config(cfg)
    if cfg.grid_search:
        hypers = [
            grid_search_hyper(
                inputs, targets[:, i], hypers[i], cfg.grid_search_subsample, cfg.kmeans_seed
            )[0]
            for i in range(RESIDUAL_DIM)
        ]

    x_tr, x_te, y_tr, y_te = train_test_split(
        inputs, targets, test_size=test_size, random_state=cfg.kmeans_seed
    )
    split_model = fit_residual_model(x_tr, y_tr, cfg, hypers=hypers)
    predicted = split_model.predict_mean(x_te)
    rmse = {
        name: float(np.sqrt(mean_squared_error(y_te[:, i], predicted[:, i])))
        for i, name in enumerate(HEAD_NAMES)
    }
    for name, value in rmse.items():
        logger.info(f"Held-out RMSE {name}: {value:.6f}")

    model = fit_residual_model(inputs, targets, cfg, hypers=hypers)
    return FitReport(model=model, hypers=hypers, rmse=rmse, n_train=len(x_tr), n_test=len(x_te))
