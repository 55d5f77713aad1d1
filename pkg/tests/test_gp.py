import numpy as np
import pytest
from scipy.stats import multivariate_normal

from ptmoo import gp
from ptmoo.errors import (ConfigurationError, DegenerateInputError, DimensionError,
                          DuplicateInputError, IllConditionedError)
from ptmoo.pls import fit_pls, identity_rotation


def matern(r):
    return (1 + np.sqrt(5) * r + 5 / 3 * r * r) * np.exp(-np.sqrt(5) * r)


def dense_kernel(X1, X2, hyper, rotation=None):
    """Textbook double loop over pairs and KPLS components."""
    out = np.empty((len(X1), len(X2)))
    theta = hyper.lengthscale_inverse
    for i, a in enumerate(X1):
        for j, b in enumerate(X2):
            diff = np.abs(a - b)
            if rotation is None:
                k = np.prod(matern(theta * diff))
            else:
                k = 1.0
                for l in range(rotation.h):
                    k *= np.prod(matern(theta[l] * np.abs(rotation.rotation[:, l]) * diff))
            out[i, j] = hyper.signal_variance * k
    return out


def random_hyper(rng, d):
    return gp.Hyperparameters(np.exp(rng.uniform(-1, 1)), np.exp(rng.uniform(-1, 1.5, d)),
                              np.exp(rng.uniform(-8, -3)))


@pytest.mark.parametrize("kpls", [False, True])
def test_lml_matches_dense_gaussian_logpdf(rng, kpls):
    X = rng.random((12, 4))
    y = rng.standard_normal(12)
    rotation = fit_pls(X, y, 2) if kpls else None
    hyper = random_hyper(rng, 2 if kpls else 4)
    K = dense_kernel(X, X, hyper, rotation) + hyper.noise_variance * np.eye(12)
    expected = multivariate_normal(np.zeros(12), K).logpdf(y)
    assert gp.log_marginal_likelihood(hyper, X, y, rotation) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("kpls", [False, True])
def test_lml_gradient_finite_difference(rng, kpls):
    X = rng.random((10, 3))
    y = np.sin(4 * X[:, 0]) + X[:, 1]
    rotation = fit_pls(X, y, 2) if kpls else None
    hyper = random_hyper(rng, 2 if kpls else 3)
    v = hyper.to_log_vector()
    _, grad = gp.log_marginal_likelihood(hyper, X, y, rotation, gradient=True)
    h = 1e-6
    for k in range(v.size):
        e = np.zeros_like(v)
        e[k] = h
        fp = gp.log_marginal_likelihood(gp.Hyperparameters.from_log_vector(v + e), X, y, rotation)
        fm = gp.log_marginal_likelihood(gp.Hyperparameters.from_log_vector(v - e), X, y, rotation)
        assert grad[k] == pytest.approx((fp - fm) / (2 * h), rel=1e-5, abs=1e-7)


def test_covariance_matches_dense_kernel(rng):
    X1, X2 = rng.random((6, 5)), rng.random((4, 5))
    hyper = random_hyper(rng, 5)
    np.testing.assert_allclose(gp.covariance(X1, X2, hyper), dense_kernel(X1, X2, hyper), rtol=1e-12)
    rot = fit_pls(X1, X1[:, 0], 3)
    h3 = random_hyper(rng, 3)
    np.testing.assert_allclose(gp.covariance(X1, X2, h3, rot), dense_kernel(X1, X2, h3, rot),
                               rtol=1e-12)


def test_scalar_kernels_agree_under_identity_rotation(rng):
    hyper = random_hyper(rng, 4)
    for _ in range(20):
        a, b = rng.random(4), rng.random(4)
        assert gp.kernel_kpls(a, b, hyper, identity_rotation(4)) == pytest.approx(
            gp.kernel_matern52(a, b, hyper), rel=1e-12)


def test_interpolates_noise_free_data():
    X = np.linspace(0, 1, 12)[:, None]
    y = np.sin(6 * X[:, 0])
    model = gp.fit(X, y, gp.FitConfig(n_starts=4))
    mean, var = model.predict(X)
    np.testing.assert_allclose(mean, y, atol=1e-4)
    assert np.sqrt(var).max() <= 1e-3 * y.std()


def test_prediction_away_from_data_has_variance():
    X = np.linspace(0, 1, 8)[:, None]
    model = gp.fit(X, X[:, 0] ** 2, bounds=([0.0], [2.0]))
    _, var = model.predict([[1.9]])
    assert var[0] > 1e-4


def test_fit_not_worse_than_any_start(rng):
    X = rng.random((15, 2))
    y = np.cos(3 * X[:, 0]) * X[:, 1]
    model = gp.fit(X, y, gp.FitConfig(n_starts=5, seed=3))
    assert model.log_likelihood >= max(model.start_log_likelihoods) - 1e-9
    ys = (y - y.mean()) / y.std()
    recomputed = gp.log_marginal_likelihood(model.hyper, model.train_inputs, ys)
    assert recomputed == pytest.approx(model.log_likelihood, rel=1e-6, abs=1e-6)


def test_kpls_fit_uses_h_lengthscales(rng):
    X = rng.random((20, 6))
    model = gp.fit(X, X @ np.arange(6.0), gp.FitConfig(h=2, n_starts=2))
    assert model.rotation.h == 2
    assert model.hyper.lengthscale_inverse.size == 2
    assert model.record()["kpls_components"] == 2


def test_constant_targets_short_circuit():
    X = np.array([[0.0], [0.5], [1.0]])
    model = gp.fit(X, np.full(3, 2.5))
    assert model.constant
    mean, var = model.predict([[0.3], [0.7]])
    np.testing.assert_array_equal(mean, 2.5)
    np.testing.assert_array_equal(var, 0.0)


def test_input_errors(rng):
    X = rng.random((5, 2))
    with pytest.raises(DuplicateInputError):
        gp.fit(np.vstack([X, X[:1]]), rng.random(6))
    with pytest.raises(DimensionError):
        gp.fit(X, rng.random(4))
    with pytest.raises(DegenerateInputError):
        gp.fit(X, np.array([1.0, np.nan, 0.0, 1.0, 2.0]))
    with pytest.raises(ConfigurationError):
        gp.fit(X[:1], [1.0])
    with pytest.raises(ConfigurationError):
        gp.fit(X, rng.random(5), gp.FitConfig(h=3))
    model = gp.fit(X, rng.random(5), gp.FitConfig(n_starts=1))
    with pytest.raises(DimensionError):
        model.predict(np.zeros((2, 3)))


def test_factorize_escalates_jitter_then_raises():
    K0 = np.ones((3, 3))  # rank one
    chol, jitter = gp._factorize(K0, 1.0, 0.0)
    assert gp.NOISE_FLOOR <= jitter <= gp.MAX_JITTER
    bad = -np.eye(3)
    with pytest.raises(IllConditionedError) as info:
        gp._factorize(bad, 1.0, 0.0)
    assert info.value.jitter == gp.MAX_JITTER


def test_hyperparameter_validation():
    with pytest.raises(ConfigurationError):
        gp.Hyperparameters(-1.0, [1.0])
    with pytest.raises(ConfigurationError):
        gp.Hyperparameters(1.0, [0.0])
    h = gp.Hyperparameters(2.0, [1.0, 3.0], 1e-6)
    back = gp.Hyperparameters.from_log_vector(h.to_log_vector())
    assert back.signal_variance == pytest.approx(2.0)
    np.testing.assert_allclose(back.lengthscale_inverse, [1.0, 3.0])
