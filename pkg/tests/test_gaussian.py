"""Plug-in KL/MI estimates and the dependence upper bound."""

import numpy as np
import pytest

from flower.flows import SingularCovarianceError, gaussian_kl_to_standard, mi_upper_bound_check


def correlated_pair(rho, n, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((n, 1))
    z = rho * c + np.sqrt(1 - rho ** 2) * rng.standard_normal((n, 1))
    return z, c


def test_independent_gaussians_have_tiny_mi():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((20000, 2))
    c = rng.standard_normal((20000, 3))
    kl, mi = mi_upper_bound_check(z, c)
    assert mi < 0.05
    assert kl + 1e-6 >= mi


def test_rho_half_matches_analytic_mi():
    # jointly Gaussian: I(z, c) = -0.5 log(1 - rho^2) = 0.14384103622589045
    z, c = correlated_pair(0.5, 50000, seed=1)
    kl, mi = mi_upper_bound_check(z, c)
    assert abs(mi - 0.14384103622589045) < 0.03
    assert kl + 1e-6 >= mi


def test_near_copy_keeps_bound_with_large_mi():
    # rho = 0.99: analytic MI = -0.5 log(1 - 0.9801) ~ 1.9586 nats
    z, c = correlated_pair(0.99, 50000, seed=2)
    kl, mi = mi_upper_bound_check(z, c)
    assert mi > 1.5
    assert abs(mi - (-0.5 * np.log(1 - 0.99 ** 2))) < 0.15
    assert kl + 1e-6 >= mi


def test_bound_holds_on_every_random_batch():
    rng = np.random.default_rng(3)
    for _ in range(25):
        n = int(rng.integers(200, 2000))
        mix = rng.standard_normal((3, 3))
        raw = rng.standard_normal((n, 3)) @ mix.T + rng.standard_normal(3)
        kl, mi = mi_upper_bound_check(raw[:, :2], raw[:, 2:])
        assert kl + 1e-6 >= mi


def test_singular_covariance_suggests_jitter():
    rng = np.random.default_rng(4)
    c = rng.standard_normal((500, 1))
    z = np.concatenate([c, c], axis=1)  # rank-deficient latent block
    with pytest.raises(SingularCovarianceError, match="jitter"):
        mi_upper_bound_check(z, c)


def test_shape_validation():
    with pytest.raises(ValueError, match="equal n"):
        mi_upper_bound_check(np.zeros((10, 1)), np.zeros((9, 1)))
    with pytest.raises(ValueError, match="samples"):
        mi_upper_bound_check(np.zeros((3, 2)), np.zeros((3, 2)))


def test_kl_to_standard_closed_form():
    # KL(N(m, s^2 I) || N(0, I)) = 0.5 (d s^2 + |m|^2 - d - d log s^2)
    mean = np.array([0.3, -0.2])
    cov = 1.5 * np.eye(2)
    expected = 0.5 * (2 * 1.5 + mean @ mean - 2 - 2 * np.log(1.5))
    assert abs(gaussian_kl_to_standard(mean, cov) - expected) < 1e-12
    assert gaussian_kl_to_standard(np.zeros(3), np.eye(3)) == 0.0
