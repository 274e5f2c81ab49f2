"""Estimator-level behavior: API conventions, determinism, pairing."""

import numpy as np
import pytest
from sklearn.base import clone

from flower.restoration import (FlowMatchingRestorer, ScoreMatchingRestorer,
                                distort_toy, make_toy_clean, make_toy_task)

FAST = dict(n_train_steps=40, batch_size=64, hidden=(16, 12, 10), sampler_steps=8)


@pytest.fixture(scope="module")
def toy_data():
    return make_toy_task(512, seed=0)


class TestToyData:
    def test_seeded_generation_is_reproducible(self):
        a = make_toy_task(256, seed=3)
        b = make_toy_task(256, seed=3)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_clean_is_standardized(self):
        x = make_toy_clean(4000, np.random.default_rng(0))
        assert np.all(np.abs(x.mean(axis=0)) < 0.05)
        assert np.all(np.abs(x.std(axis=0) - 1.0) < 0.05)

    def test_mixture_variant(self):
        x = make_toy_clean(1000, np.random.default_rng(1), kind="mixture")
        assert x.shape == (1000, 2)
        with pytest.raises(ValueError):
            make_toy_clean(10, np.random.default_rng(2), kind="spiral")

    def test_observation_model_is_linear_plus_noise(self):
        from flower.restoration import TOY_MIXING

        x = make_toy_clean(2000, np.random.default_rng(3))
        y = distort_toy(x, np.random.default_rng(4), noise_std=0.0)
        assert np.allclose(y, x @ TOY_MIXING.T)


class TestEstimatorApi:
    @pytest.mark.parametrize("cls", [FlowMatchingRestorer, ScoreMatchingRestorer])
    def test_fit_predict_shapes_and_determinism(self, cls, toy_data):
        x, y = toy_data
        est = cls(guidance="gaussian", random_state=1, **FAST)
        est.fit(y, x)
        out1 = est.predict(y[:32])
        out2 = est.predict(y[:32])
        assert out1.shape == (32, 2)
        assert np.array_equal(out1, out2)

    def test_score_is_negative_mse(self, toy_data):
        x, y = toy_data
        est = FlowMatchingRestorer(random_state=2, **FAST).fit(y, x)
        assert est.score(y[:64], x[:64]) == -est.restoration_error(y[:64], x[:64])

    def test_sklearn_clone_and_get_params(self):
        est = FlowMatchingRestorer(guidance="gaussian", random_state=9, **FAST)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()
        est.set_params(sampler_steps=5)
        assert est.sampler_steps == 5

    def test_invalid_guidance_rejected(self, toy_data):
        x, y = toy_data
        with pytest.raises(ValueError, match="guidance"):
            FlowMatchingRestorer(guidance="maximal", **FAST).fit(y, x)

    def test_time_adaptive_is_fm_only(self, toy_data):
        x, y = toy_data
        with pytest.raises(ValueError, match="flow-matching"):
            ScoreMatchingRestorer(guidance="gaussian-time-adaptive", **FAST).fit(y, x)

    def test_row_mismatch_rejected(self, toy_data):
        x, y = toy_data
        with pytest.raises(ValueError, match="rows"):
            FlowMatchingRestorer(**FAST).fit(y[:10], x[:9])

    def test_loss_history_columns(self, toy_data):
        x, y = toy_data
        est = FlowMatchingRestorer(guidance="gaussian", random_state=3, **FAST).fit(y, x)
        assert est.loss_history_.shape == (FAST["n_train_steps"], 3)
        totals = est.loss_history_[:, 0] + est.loss_history_[:, 1]
        assert np.allclose(totals, est.loss_history_[:, 2], atol=1e-12)

    def test_extract_latents_requires_guidance(self, toy_data):
        x, y = toy_data
        est = FlowMatchingRestorer(guidance="none", random_state=4, **FAST).fit(y, x)
        with pytest.raises(ValueError, match="guidance"):
            est.extract_latents(y[:8], x[:8])


class TestPairing:
    def test_field_init_identical_across_guidance_modes(self):
        base = FlowMatchingRestorer(guidance="none", random_state=5, **FAST)
        guided = FlowMatchingRestorer(guidance="gaussian", random_state=5, **FAST)
        base._initialize(2, 2)
        guided._initialize(2, 2)
        for p, q in zip(base.field_.parameters(), guided.field_.parameters()):
            assert np.array_equal(p.data, q.data)

    def test_training_data_draws_identical_across_guidance_modes(self, toy_data):
        # both variants must consume the minibatch/noise stream identically;
        # with zeroed projections and a frozen flow the guided run's field
        # would see the exact same updates, so just check the rng pattern
        x, y = toy_data
        a = FlowMatchingRestorer(guidance="none", random_state=6, **FAST)._seed(3)
        b = FlowMatchingRestorer(guidance="gaussian", random_state=6, **FAST)._seed(3)
        assert np.array_equal(a.integers(0, 100, 10), b.integers(0, 100, 10))

    def test_inference_never_touches_the_flow(self, toy_data):
        x, y = toy_data
        est = FlowMatchingRestorer(guidance="gaussian", random_state=7, **FAST).fit(y, x)
        calls_after_fit = est.flow_.forward_calls
        est.predict(y[:16])
        est.predict(y[:16])
        assert est.flow_.forward_calls == calls_after_fit

    def test_resampled_guidance_changes_output_deterministically(self, toy_data):
        x, y = toy_data
        fixed = FlowMatchingRestorer(guidance="gaussian", random_state=8,
                                     resample_guidance=False, **FAST).fit(y, x)
        resampled = clone(fixed).set_params(resample_guidance=True).fit(y, x)
        out_fixed = fixed.predict(y[:16])
        out_resampled = resampled.predict(y[:16])
        assert not np.array_equal(out_fixed, out_resampled)
        assert np.array_equal(out_resampled, resampled.predict(y[:16]))
