"""
Sparse GP Head

Single-output sparse Gaussian process on M inducing inputs with posterior
q(u) = N(m_u, S_u). Supports the closed-form batch posterior, predictive
mean/variance, and recursive least-squares updates with a forgetting factor.
Kernel hyperparameters are never changed after construction.
"""

from typing import Optional, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from gp.kernels import JITTER, KernelHyper, kernel_matrix
from utils.exceptions import DimensionMismatch, NonPositiveGain, SingularKernelMatrix

SYMMETRY_TOLERANCE = 1e-10
EIGEN_FLOOR_TOLERANCE = -1e-10


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def _floor_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Project onto the PSD cone when eigenvalues fall below the tolerance."""
    eigvals, eigvecs = np.linalg.eigh(matrix)
    if eigvals.min() >= EIGEN_FLOOR_TOLERANCE:
        return matrix
    logger.debug(f"Flooring S_u eigenvalue {eigvals.min():.3e}")
    clipped = np.clip(eigvals, 0.0, None)
    return _symmetrize((eigvecs * clipped) @ eigvecs.T)


def _cholesky(matrix: np.ndarray, what: str):
    try:
        return cho_factor(matrix, lower=True)
    except LinAlgError as e:
        raise SingularKernelMatrix(f"{what} is not positive definite: {e}") from e


class SparseGPHead:
    """
    One output of the residual model.

    Attributes:
        inducing: Inducing inputs Z_u, shape (M, D)
        hyper: Kernel hyperparameters
        mean: Posterior mean m_u, shape (M,)
        cov: Posterior covariance S_u, shape (M, M)
        kmm: K_M with jitter on the diagonal
        kmm_inv: Cached K_M^-1
        forgetting_factor: lambda in (0, 1]
        rls_noise_variance: Observation variance used by the recursion
    """

    def __init__(
        self,
        inducing: np.ndarray,
        hyper: KernelHyper,
        mean: Optional[np.ndarray] = None,
        cov: Optional[np.ndarray] = None,
        forgetting_factor: float = 1.0,
        rls_noise_variance: float = 1.0,
    ):
        inducing = np.atleast_2d(np.asarray(inducing, dtype=float))
        if inducing.shape[0] < 1:
            raise DimensionMismatch("A sparse GP head needs at least one inducing input")
        if inducing.shape[1] != hyper.dim:
            raise DimensionMismatch(
                f"Inducing inputs have {inducing.shape[1]} columns, expected {hyper.dim}"
            )
        if not 0.0 < forgetting_factor <= 1.0:
            raise ValueError(f"Forgetting factor must be in (0, 1], got {forgetting_factor}")
        if not rls_noise_variance > 0:
            raise ValueError("rls_noise_variance must be positive")

        self.inducing = inducing
        self.hyper = hyper
        self.forgetting_factor = float(forgetting_factor)
        self.rls_noise_variance = float(rls_noise_variance)

        m = inducing.shape[0]
        self.kmm = kernel_matrix(inducing, inducing, hyper) + JITTER * hyper.signal_variance * np.eye(m)
        self._kmm_chol = _cholesky(self.kmm, "K_M")
        self.kmm_inv = _symmetrize(cho_solve(self._kmm_chol, np.eye(m)))

        self.mean = np.zeros(m) if mean is None else np.asarray(mean, dtype=float).copy()
        self.cov = self.kmm.copy() if cov is None else np.asarray(cov, dtype=float).copy()
        if self.mean.shape != (m,) or self.cov.shape != (m, m):
            raise DimensionMismatch(f"Posterior shapes do not match M = {m}")
        self.updates = 0
        self._refresh()

    @property
    def num_inducing(self) -> int:
        return self.inducing.shape[0]

    def _refresh(self) -> None:
        # alpha = K_M^-1 m_u, reused by every mean prediction
        self.alpha = self.kmm_inv @ self.mean

    @classmethod
    def prior(cls, inducing: np.ndarray, hyper: KernelHyper, **kwargs) -> "SparseGPHead":
        """m_u = 0, S_u = K_M."""
        return cls(inducing, hyper, **kwargs)

    def reset_to_prior(self) -> None:
        self.mean = np.zeros(self.num_inducing)
        self.cov = self.kmm.copy()
        self.updates = 0
        self._refresh()

    def copy(self, read_only: bool = False) -> "SparseGPHead":
        clone = object.__new__(SparseGPHead)
        clone.__dict__.update(self.__dict__)
        clone.mean = self.mean.copy()
        clone.cov = self.cov.copy()
        clone.alpha = self.alpha.copy()
        if read_only:
            for arr in (clone.mean, clone.cov, clone.alpha):
                arr.setflags(write=False)
        return clone

    def cross_kernel(self, z: np.ndarray) -> np.ndarray:
        """K_{zM}, shape (n, M)."""
        return kernel_matrix(z, self.inducing, self.hyper)

    def feature_row(self, z: np.ndarray) -> np.ndarray:
        """Phi = K_{zM} K_M^-1; a single z gives an M-vector."""
        z = np.asarray(z, dtype=float)
        phi = self.cross_kernel(z) @ self.kmm_inv
        return phi[0] if z.ndim == 1 else phi

    def predict_mean(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        mu = np.einsum("nm,m->n", self.cross_kernel(z), self.alpha)
        return mu[0] if z.ndim == 1 else mu

    def predict(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Predictive mean K_{zM} K_M^-1 m_u and variance
        k_zz - K_{zM}(K_M^-1 - K_M^-1 S_u K_M^-1)K_{Mz}, floored at 0.
        """
        z = np.asarray(z, dtype=float)
        kzm = self.cross_kernel(z)
        phi = kzm @ self.kmm_inv
        mu = np.einsum("nm,m->n", kzm, self.alpha)
        var = (
            self.hyper.signal_variance
            - np.einsum("nm,nm->n", phi, kzm)
            + np.einsum("nm,nm->n", phi @ self.cov, phi)
        )
        var = np.maximum(var, 0.0)
        if z.ndim == 1:
            return float(mu[0]), float(var[0])
        return mu, var

    def recursive_update(self, z: np.ndarray, y: float) -> "SparseGPHead":
        """
        Fold one observation into (m_u, S_u) in place.

            r = y - Phi m
            G = lambda * rho + Phi S Phi^T
            L = S Phi^T / G
            m <- m + L r
            S <- (S - L G L^T) / lambda

        rho = 1 reproduces the unit-noise recursion.

        Raises:
            NonPositiveGain: G is not a positive finite number
        """
        phi = self.feature_row(np.asarray(z, dtype=float).reshape(-1))
        lam = self.forgetting_factor
        s_phi = self.cov @ phi
        gain = lam * self.rls_noise_variance + float(phi @ s_phi)
        if not np.isfinite(gain) or gain <= 0.0:
            raise NonPositiveGain(f"RLS gain {gain} is not positive", context={"updates": self.updates})

        innovation = float(y) - float(phi @ self.mean)
        l_vec = s_phi / gain
        self.mean = self.mean + l_vec * innovation
        cov = (self.cov - gain * np.outer(l_vec, l_vec)) / lam
        self.cov = _floor_eigenvalues(_symmetrize(cov))
        self.updates += 1
        self._refresh()
        return self


def batch_fit(
    Z: np.ndarray,
    Y: np.ndarray,
    Z_u: np.ndarray,
    hyper: KernelHyper,
    forgetting_factor: float = 1.0,
    rls_noise_variance: float = 1.0,
) -> SparseGPHead:
    """
    Closed-form sparse posterior.

        S_u = K_M (K_M + s^-2 K_MN K_NM)^-1 K_M
        m_u = s^-2 S_u K_M^-1 K_MN Y

    with s^2 the noise variance. N = 0 returns the prior.

    Raises:
        DimensionMismatch: Z, Y and Z_u shapes disagree
        SingularKernelMatrix: K_M or the posterior precision is not PD
    """
    Z = np.asarray(Z, dtype=float).reshape(-1, hyper.dim) if np.size(Z) else np.zeros((0, hyper.dim))
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if Z.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"{Z.shape[0]} inputs but {Y.shape[0]} targets")

    head = SparseGPHead(
        Z_u,
        hyper,
        forgetting_factor=forgetting_factor,
        rls_noise_variance=rls_noise_variance,
    )
    if Z.shape[0] == 0:
        return head

    precision = 1.0 / hyper.noise_variance
    kmn = kernel_matrix(head.inducing, Z, hyper)
    system = head.kmm + precision * (kmn @ kmn.T)
    chol = _cholesky(_symmetrize(system), "Posterior system")
    # S_u K_M^-1 = K_M system^-1
    solved = cho_solve(chol, head.kmm)
    head.cov = _floor_eigenvalues(_symmetrize(head.kmm @ solved))
    head.mean = precision * head.kmm @ cho_solve(chol, kmn @ Y)
    head._refresh()
    logger.debug(f"Batch fit: N={Z.shape[0]}, M={head.num_inducing}")
    return head
