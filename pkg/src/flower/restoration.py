"""Restoration estimators pairing a conditional field network with
optional Gaussian guidance, plus the 2-d toy task used to benchmark them.

The toy stand-in for restoration: clean points x from a two-moons or
Gaussian-mixture distribution, observations y = A x + noise with a fixed
mixing matrix. An estimator fits the generative model on (y, x) pairs
and restores x from y by sampling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.datasets import make_moons

from ._validation import check_matrix
from .autodiff import Adam
from .flows import FlowStack
from .guidance import GuidanceProjector, joint_loss, sample_guidance
from .paths import (FieldNetwork, OtPath, SamplerConfig, ScoreField, VeSde,
                    euler_sample, fm_loss, reverse_sde_sample, score_matching_loss)

GUIDANCE_MODES = ("none", "gaussian", "gaussian-time-adaptive")

# fixed mixing matrix for the toy observation model: invertible but
# far from orthogonal, so the observation genuinely garbles the data
TOY_MIXING = np.array([[0.9, 0.4], [-0.3, 0.8]])


def make_toy_clean(n: int, rng: np.random.Generator, kind: str = "moons") -> np.ndarray:
    """Draw n clean 2-d points, standardized to zero mean and unit scale."""
    if kind == "moons":
        x, _ = make_moons(n_samples=n, noise=0.06,
                          random_state=int(rng.integers(2 ** 31)))
    elif kind == "mixture":
        centers = np.array([[-1.2, -0.8], [1.2, 0.8], [0.0, 1.4]])
        pick = rng.integers(0, len(centers), size=n)
        x = centers[pick] + 0.35 * rng.standard_normal((n, 2))
    else:
        raise ValueError(f"unknown toy distribution {kind!r}")
    x = np.asarray(x, dtype=np.float64)
    return (x - x.mean(axis=0)) / x.std(axis=0)


def distort_toy(x: np.ndarray, rng: np.random.Generator,
                noise_std: float = 0.3) -> np.ndarray:
    """Observation model y = A x + eps with the fixed mixing matrix."""
    x = np.asarray(x, dtype=np.float64)
    return x @ TOY_MIXING.T + noise_std * rng.standard_normal(x.shape)


def make_toy_task(n: int, seed: int, kind: str = "moons", noise_std: float = 0.3):
    """Seeded (clean, distorted) pair generation for paired comparisons."""
    rng = np.random.default_rng(seed)
    x = make_toy_clean(n, rng, kind)
    y = distort_toy(x, rng, noise_std)
    return x, y


class _GuidedRestorer(BaseEstimator):
    """Shared fit/predict machinery; subclasses pick the framework."""

    _framework = None  # "fm" or "score"

    def __init__(self, guidance: str = "none", hidden=(64, 64, 64),
                 time_embed_dim: int = 8, flow_blocks: int = 4, flow_bins: int = 8,
                 flow_bound: float = 3.0, flow_hidden: int = 32,
                 detach_latent: bool = False, learning_rate: float = 1e-3,
                 n_train_steps: int = 2000, batch_size: int = 128,
                 sampler_steps: int = 25, sigma_min: float = 1e-4,
                 sigma_lo: float = 0.01, sigma_hi: float = 10.0,
                 resample_guidance: bool = False, random_state: int = 0):
        self.guidance = guidance
        self.hidden = hidden
        self.time_embed_dim = time_embed_dim
        self.flow_blocks = flow_blocks
        self.flow_bins = flow_bins
        self.flow_bound = flow_bound
        self.flow_hidden = flow_hidden
        self.detach_latent = detach_latent
        self.learning_rate = learning_rate
        self.n_train_steps = n_train_steps
        self.batch_size = batch_size
        self.sampler_steps = sampler_steps
        self.sigma_min = sigma_min
        self.sigma_lo = sigma_lo
        self.sigma_hi = sigma_hi
        self.resample_guidance = resample_guidance
        self.random_state = random_state

    # seed stream indices; the field stream never moves so that guided and
    # unguided variants start from bit-identical field networks
    _SEED_FIELD, _SEED_FLOW, _SEED_PROJ, _SEED_TRAIN, _SEED_PREDICT = range(5)

    def _seed(self, index: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.random_state).spawn(5)[index])

    @property
    def _scaling(self) -> str:
        return "time-adaptive" if self.guidance == "gaussian-time-adaptive" else "constant"

    def _make_path(self):
        if self._framework == "fm":
            return OtPath(sigma_min=self.sigma_min)
        return VeSde(sigma_lo=self.sigma_lo, sigma_hi=self.sigma_hi)

    def _wrap_model(self, field, path):
        return ScoreField(field, path) if self._framework == "score" else field

    def _initialize(self, obs_dim: int, data_dim: int) -> list:
        """Build the networks for the given dimensions; returns all parameters."""
        if self.guidance not in GUIDANCE_MODES:
            raise ValueError(f"guidance must be one of {GUIDANCE_MODES}, "
                             f"got {self.guidance!r}")
        if self.guidance == "gaussian-time-adaptive" and self._framework != "fm":
            raise ValueError("time-adaptive guidance scaling is defined for the "
                             "flow-matching framework only")
        self.n_features_in_ = obs_dim
        self.data_dim_ = data_dim
        self.path_ = self._make_path()
        self.field_ = FieldNetwork(
            data_dim, obs_dim, hidden=self.hidden,
            time_dim=self.time_embed_dim, rng=self._seed(self._SEED_FIELD))
        params = self.field_.parameters()
        self.flow_ = None
        self.projector_ = None
        if self.guidance != "none":
            self.flow_ = FlowStack(
                data_dim, cond_dim=self.field_.latent_dim,
                n_blocks=self.flow_blocks, bins=self.flow_bins,
                bound=self.flow_bound, hidden=self.flow_hidden,
                rng=self._seed(self._SEED_FLOW))
            self.projector_ = GuidanceProjector(
                data_dim, self.field_.site_dims, rng=self._seed(self._SEED_PROJ))
            params = params + self.flow_.parameters() + self.projector_.parameters()
        return params

    def fit(self, Y, X):
        """Train on (distorted Y, clean X) pairs."""
        Y = check_matrix(Y, "Y")
        X = check_matrix(X, "X")
        if Y.shape[0] != X.shape[0]:
            raise ValueError(f"Y has {Y.shape[0]} rows, X has {X.shape[0]}")
        params = self._initialize(Y.shape[1], X.shape[1])
        model = self._wrap_model(self.field_, self.path_)

        rng = self._seed(self._SEED_TRAIN)
        optimizer = Adam(params, lr=self.learning_rate)
        n = X.shape[0]
        history = []
        for _ in range(self.n_train_steps):
            pick = rng.integers(0, n, size=min(self.batch_size, n))
            xb, yb = X[pick], Y[pick]
            if self.guidance == "none":
                if self._framework == "fm":
                    loss = fm_loss(model, xb, yb, self.path_, rng)
                else:
                    loss = score_matching_loss(model, xb, yb, self.path_, rng)
                record = (float(loss.data), 0.0, float(loss.data))
            else:
                jl = joint_loss(self.field_, self.flow_, self.projector_, xb, yb,
                                self.path_, rng, scaling=self._scaling,
                                detach_latent=self.detach_latent)
                loss = jl.total
                record = (float(jl.l_unet.data), float(jl.l_nf.data), float(jl.total.data))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            history.append(record)
        self.loss_history_ = np.asarray(history)  # columns: l_unet, l_nf, total
        return self

    def _sampler_config(self) -> SamplerConfig:
        predict_seed = int(self._seed(self._SEED_PREDICT).integers(2 ** 31))
        return SamplerConfig(n_steps=self.sampler_steps, seed=predict_seed,
                             resample_guidance=self.resample_guidance)

    def _inference_guidance(self, n_items: int, config: SamplerConfig):
        if self.guidance == "none":
            return None
        # offset seed: the guidance draw must not shift the sampler's stream
        return sample_guidance(self.data_dim_, config.seed + 1, self.projector_,
                               scaling=self._scaling, n_items=n_items)

    def predict(self, Y, return_trajectory: bool = False):
        """Restore clean samples for each row of Y. Deterministic per fit."""
        Y = check_matrix(Y, "Y", expected_cols=self.n_features_in_)
        config = self._sampler_config()
        ctx = self._inference_guidance(Y.shape[0], config)
        model = self._wrap_model(self.field_, self.path_)
        shape = (Y.shape[0], self.data_dim_)
        if self._framework == "fm":
            return euler_sample(model, Y, config, shape=shape, guidance=ctx,
                                return_trajectory=return_trajectory)
        if return_trajectory:
            raise ValueError("trajectory capture is only supported for the FM sampler")
        return reverse_sde_sample(model, Y, self.path_, config, shape=shape, guidance=ctx)

    def restoration_error(self, Y, X) -> float:
        """Mean squared error between restored samples and the clean truth."""
        X = check_matrix(X, "X", expected_cols=self.data_dim_)
        x_hat = self.predict(Y)
        return float(np.mean((x_hat - X) ** 2))

    def score(self, Y, X) -> float:
        """Negative restoration MSE, so that larger is better."""
        return -self.restoration_error(Y, X)

    def extract_latents(self, Y, X, seed: int = 0):
        """Guidance latents and conditioning latents for diagnostic checks."""
        if self.flow_ is None:
            raise ValueError("estimator was fit without guidance")
        Y = check_matrix(Y, "Y", expected_cols=self.n_features_in_)
        X = check_matrix(X, "X", expected_cols=self.data_dim_)
        jl = joint_loss(self.field_, self.flow_, self.projector_, X, Y, self.path_,
                        np.random.default_rng(seed), scaling=self._scaling,
                        detach_latent=self.detach_latent)
        return jl.z.data.copy(), jl.latent.data.copy()

    def named_parameters(self) -> dict:
        named = dict(self.field_.named_parameters())
        if self.flow_ is not None:
            named.update(self.flow_.named_parameters())
            named.update(self.projector_.named_parameters())
        return named


class FlowMatchingRestorer(_GuidedRestorer):
    """Flow-matching restoration on the optimal-transport path."""

    _framework = "fm"


class ScoreMatchingRestorer(_GuidedRestorer):
    """Score-matching restoration with the variance-exploding SDE."""

    _framework = "score"
