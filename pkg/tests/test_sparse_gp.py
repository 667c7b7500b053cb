#!/usr/bin/env python3
"""
Tests for the ARD kernel and the sparse GP head: batch posterior against the
exact GP, recursive updates against the batch posterior, forgetting and gain
breakdown.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from gp.kernels import KernelHyper, kernel, kernel_matrix
from gp.sparse_gp import SparseGPHead, batch_fit
from utils.exceptions import DimensionMismatch, LearningError, NonPositiveGain

INDUCING_LAYOUT = np.array(
    [[-1.5, -0.75], [0.0, -0.75], [1.5, -0.75], [-1.5, 0.75], [0.0, 0.75], [1.5, 0.75]]
)


def _exact_gp(z_train, y, z_test, hyper):
    gram = kernel_matrix(z_train, z_train, hyper) + hyper.noise_variance * np.eye(len(z_train))
    cross = kernel_matrix(z_test, z_train, hyper)
    mean = cross @ np.linalg.solve(gram, y)
    var = hyper.signal_variance - np.einsum("ij,ji->i", cross, np.linalg.solve(gram, cross.T))
    return mean, var


def test_kernel_value_and_symmetry():
    hyper = KernelHyper((0.5, 2.0), 1.7, 0.1)
    z1 = np.array([0.3, -1.0])
    z2 = np.array([-0.2, 0.5])
    expected = 1.7 * np.exp(-0.5 * ((0.5 / 0.5) ** 2 + (1.5 / 2.0) ** 2))
    assert kernel(z1, z2, hyper) == pytest.approx(expected, rel=1e-14)
    assert kernel(z1, z1, hyper) == pytest.approx(1.7, rel=1e-15)

    points = np.random.default_rng(0).normal(size=(7, 2))
    gram = kernel_matrix(points, points, hyper)
    np.testing.assert_allclose(gram, gram.T, atol=1e-15)
    assert np.linalg.eigvalsh(gram).min() > -1e-12


def test_kernel_rejects_bad_hyperparameters_and_dimensions():
    with pytest.raises(LearningError):
        KernelHyper((1.0, -1.0), 1.0, 0.1)
    with pytest.raises(DimensionMismatch):
        kernel_matrix(np.zeros((3, 3)), np.zeros((2, 3)), KernelHyper((1.0, 1.0), 1.0, 0.1))


@pytest.mark.parametrize("seed", range(10))
def test_batch_fit_on_training_inputs_matches_exact_gp(seed):
    rng = np.random.default_rng(seed)
    hyper = KernelHyper((0.8, 0.8), 1.3, 0.1)
    n = int(rng.integers(3, 11))
    z = rng.uniform(-3.0, 3.0, (n, 2))
    y = rng.normal(size=n)
    z_test = rng.uniform(-3.0, 3.0, (20, 2))

    head = batch_fit(z, y, z, hyper)
    mean, var = head.predict(z_test)
    exact_mean, exact_var = _exact_gp(z, y, z_test, hyper)
    np.testing.assert_allclose(mean, exact_mean, atol=1e-6)
    np.testing.assert_allclose(var, exact_var, atol=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_recursive_updates_reproduce_batch_posterior(seed):
    """With lambda = 1 and rho equal to the noise variance the recursion is exact."""
    rng = np.random.default_rng(100 + seed)
    noise = 0.5
    hyper = KernelHyper((1.0, 1.0), 1.0, noise)
    inducing = INDUCING_LAYOUT + rng.uniform(-0.2, 0.2, INDUCING_LAYOUT.shape)
    z = rng.uniform(-2.0, 2.0, (40, 2))
    y = np.sin(z[:, 0]) + 0.3 * rng.normal(size=40)

    head = SparseGPHead.prior(inducing, hyper, forgetting_factor=1.0, rls_noise_variance=noise)
    for zi, yi in zip(z, y):
        head.recursive_update(zi, yi)
    batch = batch_fit(z, y, inducing, hyper, forgetting_factor=1.0, rls_noise_variance=noise)

    np.testing.assert_allclose(head.mean, batch.mean, atol=1e-6)
    np.testing.assert_allclose(head.cov, batch.cov, atol=1e-6)
    assert head.updates == 40


def test_batch_fit_without_data_is_the_prior():
    hyper = KernelHyper((1.0, 1.0), 2.0, 0.1)
    head = batch_fit(np.zeros((0, 2)), np.zeros(0), INDUCING_LAYOUT, hyper)
    np.testing.assert_array_equal(head.mean, np.zeros(6))
    np.testing.assert_array_equal(head.cov, head.kmm)
    mean, var = head.predict(np.array([[0.2, 0.1], [5.0, 5.0]]))
    np.testing.assert_allclose(mean, 0.0, atol=1e-15)
    np.testing.assert_allclose(var, 2.0, atol=1e-6)


def test_batch_fit_rejects_mismatched_targets():
    hyper = KernelHyper((1.0, 1.0), 1.0, 0.1)
    with pytest.raises(DimensionMismatch):
        batch_fit(np.zeros((4, 2)), np.zeros(3), INDUCING_LAYOUT, hyper)


def test_predictive_variance_stays_below_prior_variance():
    rng = np.random.default_rng(7)
    hyper = KernelHyper((1.0, 1.0), 1.5, 0.1)
    head = SparseGPHead.prior(INDUCING_LAYOUT, hyper)
    chol = np.linalg.cholesky(head.kmm)
    for _ in range(100):
        q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
        shrink = (q * rng.uniform(0.0, 1.0, 6)) @ q.T
        cov = chol @ shrink @ chol.T
        shrunk = SparseGPHead(INDUCING_LAYOUT, hyper, mean=rng.normal(size=6), cov=cov)
        _, var = shrunk.predict(rng.uniform(-4.0, 4.0, (30, 2)))
        assert np.all(var >= 0.0)
        assert np.all(var <= hyper.signal_variance + 1e-10)


def test_predict_mean_agrees_with_predict():
    rng = np.random.default_rng(8)
    hyper = KernelHyper((1.0, 0.5), 1.0, 0.2)
    z = rng.uniform(-2.0, 2.0, (30, 2))
    head = batch_fit(z, np.cos(z[:, 1]), INDUCING_LAYOUT, hyper)
    query = rng.uniform(-2.0, 2.0, (15, 2))
    np.testing.assert_allclose(head.predict_mean(query), head.predict(query)[0], atol=1e-14)
    assert head.predict_mean(query[0]) == pytest.approx(head.predict(query[0])[0], abs=1e-14)


def test_feature_row_at_inducing_inputs_is_a_unit_row():
    hyper = KernelHyper((0.5, 0.5), 1.0, 0.1)
    head = SparseGPHead.prior(INDUCING_LAYOUT, hyper)
    # jitter on K_M leaves an offset of order 1e-8
    np.testing.assert_allclose(head.feature_row(INDUCING_LAYOUT), np.eye(6), atol=1e-7)
    for j, z in enumerate(INDUCING_LAYOUT):
        assert np.argmax(head.feature_row(z)) == j


def test_feature_row_times_mean_is_the_predictive_mean():
    rng = np.random.default_rng(11)
    hyper = KernelHyper((0.9, 0.6), 1.4, 0.1)
    head = SparseGPHead(INDUCING_LAYOUT, hyper, mean=rng.normal(size=6))
    query = rng.uniform(-3.0, 3.0, (1000, 2))
    np.testing.assert_allclose(head.feature_row(query) @ head.mean, head.predict_mean(query), atol=1e-10)


def test_predictive_mean_is_linear_in_the_inducing_mean():
    rng = np.random.default_rng(12)
    hyper = KernelHyper((1.0, 0.7), 0.8, 0.1)
    m1, m2 = rng.normal(size=(2, 6))
    a, b = 1.7, -0.4
    query = rng.uniform(-2.5, 2.5, (200, 2))

    def mean_with(m):
        return SparseGPHead(INDUCING_LAYOUT, hyper, mean=m).predict_mean(query)

    np.testing.assert_allclose(mean_with(a * m1 + b * m2), a * mean_with(m1) + b * mean_with(m2), atol=1e-12)


def test_covariance_trace_never_grows_without_forgetting():
    rng = np.random.default_rng(13)
    hyper = KernelHyper((1.0, 1.0), 1.0, 0.2)
    head = SparseGPHead.prior(INDUCING_LAYOUT, hyper, forgetting_factor=1.0, rls_noise_variance=0.2)
    trace = np.trace(head.cov)
    for _ in range(200):
        head.recursive_update(rng.uniform(-2.5, 2.5, 2), rng.normal())
        assert np.trace(head.cov) <= trace + 1e-12
        assert np.linalg.eigvalsh(head.cov).min() >= -1e-10
        trace = np.trace(head.cov)


def _scalar_head(forgetting_factor: float) -> SparseGPHead:
    return SparseGPHead.prior(
        np.zeros((1, 2)),
        KernelHyper((1.0, 1.0), 1.0, 1.0),
        forgetting_factor=forgetting_factor,
        rls_noise_variance=1.0,
    )


def test_forgetting_tracks_recent_observations():
    origin = np.zeros(2)
    heads = {lam: _scalar_head(lam) for lam in (1.0, 0.8)}
    for head in heads.values():
        for y in [1.0] * 30 + [-1.0] * 30:
            head.recursive_update(origin, y)

    assert abs(heads[1.0].predict_mean(origin)) < 1e-9
    assert heads[0.8].predict_mean(origin) < -0.9


def test_negative_gain_raises():
    head = _scalar_head(1.0)
    head.cov = np.array([[-10.0]])
    with pytest.raises(NonPositiveGain):
        head.recursive_update(np.zeros(2), 1.0)


def test_reset_to_prior_restores_mean_and_covariance():
    head = _scalar_head(0.9)
    for _ in range(5):
        head.recursive_update(np.zeros(2), 0.5)
    head.reset_to_prior()
    np.testing.assert_array_equal(head.mean, [0.0])
    np.testing.assert_array_equal(head.cov, head.kmm)
    assert head.updates == 0


def test_read_only_copy_is_detached():
    head = _scalar_head(1.0)
    snapshot = head.copy(read_only=True)
    head.recursive_update(np.zeros(2), 1.0)

    assert snapshot.mean[0] == 0.0
    assert head.mean[0] != 0.0
    with pytest.raises(ValueError):
        snapshot.mean[0] = 1.0


def test_head_validates_shapes_and_factors():
    hyper = KernelHyper((1.0, 1.0), 1.0, 0.1)
    with pytest.raises(DimensionMismatch):
        SparseGPHead(np.zeros((3, 4)), hyper)
    with pytest.raises(DimensionMismatch):
        SparseGPHead(INDUCING_LAYOUT, hyper, mean=np.zeros(2))
    with pytest.raises(ValueError):
        SparseGPHead(INDUCING_LAYOUT, hyper, forgetting_factor=0.0)
