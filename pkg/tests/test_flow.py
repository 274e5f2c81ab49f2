"""Coupling-flow checks: bijectivity, exact Jacobians, likelihood training."""

import numpy as np
import pytest

from flower.flows import (ConditionalSplineFlow, FlowStack, nf_loss)

from helpers import numerical_jacobian

LOG_TWO_PI = np.log(2.0 * np.pi)


def perturbed_flow(dim, cond_dim, seed, scale=0.4):
    """Flow with randomized final coefficient layers (non-identity splines)."""
    flow = FlowStack(dim=dim, cond_dim=cond_dim, rng=np.random.default_rng(seed))
    rng = np.random.default_rng(seed + 1)
    for block in flow.blocks:
        last = block.net.layers[-1]
        last.weight.data += scale * rng.standard_normal(last.weight.data.shape)
        last.bias.data += scale * rng.standard_normal(last.bias.data.shape)
    return flow


def test_identity_initialization_stack():
    rng = np.random.default_rng(0)
    flow = FlowStack(dim=2, cond_dim=3, rng=rng)
    x = np.random.default_rng(1).standard_normal((50, 2))
    c = np.random.default_rng(2).standard_normal((50, 3))
    z, log_det = flow.forward(x, c)
    assert np.max(np.abs(z.data - x)) < 1e-12
    assert np.max(np.abs(log_det.data)) < 1e-12
    assert np.max(np.abs(flow.inverse(z.data, c) - x)) < 1e-12


def test_round_trip_1000_random_pairs():
    flow = perturbed_flow(dim=2, cond_dim=3, seed=0)
    rng = np.random.default_rng(3)
    x = rng.uniform(-3, 3, (1000, 2))
    c = rng.standard_normal((1000, 3))
    z, _ = flow.forward(x, c)
    x_hat = flow.inverse(z.data, c)
    assert np.max(np.abs(x_hat - x)) < 1e-6


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_log_det_matches_numerical_jacobian(dim):
    flow = perturbed_flow(dim=dim, cond_dim=2, seed=dim)
    rng = np.random.default_rng(10 + dim)
    worst = 0.0
    for _ in range(34):  # about 100 trials across the three dims
        x = rng.uniform(-2.5, 2.5, (1, dim))
        c = rng.standard_normal((1, 2))
        _, log_det = flow.forward(x, c)

        def f(vec):
            z, _ = flow.forward(vec[None, :], c)
            return z.data[0]

        jac = numerical_jacobian(f, x[0], step=1e-5)
        sign, ref = np.linalg.slogdet(jac)
        assert sign > 0
        rel = abs(float(log_det.data[0]) - ref) / max(abs(ref), 1e-2)
        worst = max(worst, rel)
    assert worst < 1e-3


def test_forward_counts_calls():
    flow = FlowStack(dim=2, cond_dim=0, rng=np.random.default_rng(0))
    x = np.zeros((4, 2))
    assert flow.forward_calls == 0
    flow.forward(x)
    flow.forward(x)
    assert flow.forward_calls == 2


def test_dimension_mismatch_errors():
    flow = FlowStack(dim=2, cond_dim=3, rng=np.random.default_rng(0))
    with pytest.raises(ValueError, match="dimension"):
        flow.forward(np.zeros((5, 4)), np.zeros((5, 3)))
    with pytest.raises(ValueError, match="condition"):
        flow.forward(np.zeros((5, 2)), np.zeros((5, 7)))
    with pytest.raises(ValueError, match="conditional"):
        flow.forward(np.zeros((5, 2)), None)
    with pytest.raises(ValueError):
        FlowStack(dim=1)


def test_nll_of_identity_flow_on_standard_gaussian():
    # for z = x, nll per dim should approach the Gaussian entropy
    flow = FlowStack(dim=2, cond_dim=0, rng=np.random.default_rng(0))
    x = np.random.default_rng(4).standard_normal((10000, 2))
    loss = nf_loss(flow, x)
    per_dim = float(loss.nll.data) / 2
    assert abs(per_dim - 0.5 * (1 + LOG_TWO_PI)) < 0.05
    assert loss.kl_term == float(loss.nll.data)
    assert loss.log_det.shape == (10000,)


def test_nll_invariant_to_batch_order():
    flow = perturbed_flow(dim=2, cond_dim=0, seed=5)
    rng = np.random.default_rng(6)
    x = rng.uniform(-3, 3, (256, 2))
    perm = rng.permutation(256)
    a = float(nf_loss(flow, x).nll.data)
    b = float(nf_loss(flow, x[perm]).nll.data)
    assert abs(a - b) < 1e-10


def test_nonfinite_log_det_flagged():
    flow = FlowStack(dim=2, cond_dim=0, rng=np.random.default_rng(0))
    block = flow.blocks[0]
    block.net.layers[-1].bias.data[:] = np.inf
    with pytest.raises((FloatingPointError, ValueError)):
        nf_loss(flow, np.zeros((4, 2)))


def test_empty_batch_rejected():
    flow = FlowStack(dim=2, cond_dim=0, rng=np.random.default_rng(0))
    with pytest.raises(ValueError, match="nonempty"):
        nf_loss(flow, np.zeros((0, 2)))


@pytest.fixture(scope="module")
def trained_gaussian_flow():
    """Flow trained on x ~ N(m, s^2 I) with a constant condition vector."""
    rng = np.random.default_rng(7)
    mean = np.array([0.5, -0.3])
    std = 0.7
    x = mean + std * rng.standard_normal((8000, 2))
    c = np.tile([[1.0, -1.0]], (8000, 1))
    est = ConditionalSplineFlow(learning_rate=5e-3, n_steps=1200, batch_size=256,
                                random_state=11)
    est.fit(x, c)
    return est, mean, std, rng


def test_trained_flow_latent_moments(trained_gaussian_flow):
    est, mean, std, rng = trained_gaussian_flow
    x = mean + std * rng.standard_normal((5000, 2))
    c = np.tile([[1.0, -1.0]], (5000, 1))
    z = est.transform(x, c)
    assert np.all(np.abs(z.mean(axis=0)) < 0.1)
    assert np.all((z.var(axis=0) > 0.8) & (z.var(axis=0) < 1.2))


def test_trained_flow_sampling_kl(trained_gaussian_flow):
    # inverse-transform of standard normal latents should land near the
    # target; plug-in Gaussian KL to the target stays below 0.1 nats
    est, mean, std, rng = trained_gaussian_flow
    z = rng.standard_normal((5000, 2))
    c = np.tile([[1.0, -1.0]], (5000, 1))
    samples = est.inverse_transform(z, c)
    m_hat = samples.mean(axis=0)
    cov_hat = np.cov(samples, rowvar=False)
    target_cov = std ** 2 * np.eye(2)
    # analytic Gaussian KL(N(m_hat, cov_hat) || N(mean, std^2 I))
    inv_t = np.linalg.inv(target_cov)
    delta = m_hat - mean
    kl = 0.5 * (np.trace(inv_t @ cov_hat) + delta @ inv_t @ delta - 2
                + np.log(np.linalg.det(target_cov) / np.linalg.det(cov_hat)))
    assert kl < 0.1


def test_trained_flow_nll_near_true_entropy(trained_gaussian_flow):
    # change of variables: held-out nll within 0.1 nats/dim of the
    # differential entropy of the data distribution
    est, mean, std, rng = trained_gaussian_flow
    x = mean + std * rng.standard_normal((5000, 2))
    c = np.tile([[1.0, -1.0]], (5000, 1))
    nll_per_dim = -est.score(x, c) / 2
    true_entropy_per_dim = 0.5 * (1 + LOG_TWO_PI) + np.log(std)
    assert abs(nll_per_dim - true_entropy_per_dim) < 0.1


def test_training_reduces_nll_over_moving_average(trained_gaussian_flow):
    est, _, _, _ = trained_gaussian_flow
    history = est.loss_history_
    window = 10
    ma = np.convolve(history, np.ones(window) / window, mode="valid")
    coarse = ma[::100]
    assert coarse[-1] < coarse[0]
    # allow micro-wobble, but the averaged curve must never move up materially
    assert np.all(np.diff(coarse) < 0.05)


def test_estimator_round_trip_and_params():
    from sklearn.base import clone

    est = ConditionalSplineFlow(n_steps=30, batch_size=64, random_state=0)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((400, 2))
    est.fit(x)
    z = est.transform(x[:50])
    back = est.inverse_transform(z)
    assert np.max(np.abs(back - x[:50])) < 1e-6
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()
    with pytest.raises(ValueError):
        est.transform(x[:50], rng.standard_normal((50, 2)))
