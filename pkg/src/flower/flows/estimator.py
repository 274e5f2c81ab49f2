"""scikit-learn style wrapper around the conditional spline flow."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .._validation import check_matrix
from ..autodiff import Adam
from .coupling import FlowStack, nf_loss


class ConditionalSplineFlow(BaseEstimator):
    """Conditional normalizing flow trained by negative log-likelihood.

    Follows the transformer conventions: ``fit(X, condition)`` trains the
    flow, ``transform`` maps data to the Gaussian latent, and
    ``inverse_transform`` maps latents back to data. ``score`` returns the
    mean log-likelihood, as scikit-learn density estimators do.

    Parameters
    ----------
    n_blocks, n_bins, bound, hidden_units : flow architecture.
    learning_rate, n_steps, batch_size : Adam training schedule.
    random_state : seed for initialization and minibatch draws.
    """

    def __init__(self, n_blocks: int = 4, n_bins: int = 8, bound: float = 3.0,
                 hidden_units: int = 32, learning_rate: float = 5e-3,
                 n_steps: int = 1500, batch_size: int = 256, random_state: int = 0):
        self.n_blocks = n_blocks
        self.n_bins = n_bins
        self.bound = bound
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.n_steps = n_steps
        self.batch_size = batch_size
        self.random_state = random_state

    def _condition(self, condition, n_rows: int):
        if self.cond_dim_ == 0:
            if condition is not None:
                raise ValueError("flow was fit without a condition")
            return None
        condition = check_matrix(condition, "condition", expected_cols=self.cond_dim_)
        if condition.shape[0] != n_rows:
            raise ValueError(f"condition has {condition.shape[0]} rows "
                             f"for {n_rows} data rows")
        return condition

    def fit(self, X, condition=None):
        X = check_matrix(X, "X")
        self.n_features_in_ = X.shape[1]
        self.cond_dim_ = 0 if condition is None else check_matrix(condition, "condition").shape[1]
        cond = self._condition(condition, X.shape[0])
        seeds = np.random.SeedSequence(self.random_state).spawn(2)
        self.flow_ = FlowStack(
            dim=self.n_features_in_, cond_dim=self.cond_dim_,
            n_blocks=self.n_blocks, bins=self.n_bins, bound=self.bound,
            hidden=self.hidden_units, rng=np.random.default_rng(seeds[0]),
        )
        rng = np.random.default_rng(seeds[1])
        optimizer = Adam(self.flow_.parameters(), lr=self.learning_rate)
        history = []
        n = X.shape[0]
        for _ in range(self.n_steps):
            pick = rng.integers(0, n, size=min(self.batch_size, n))
            loss = nf_loss(self.flow_, X[pick], None if cond is None else cond[pick])
            optimizer.zero_grad()
            loss.nll.backward()
            optimizer.step()
            history.append(float(loss.nll.data))
        self.loss_history_ = np.asarray(history)
        return self

    def transform(self, X, condition=None):
        X = check_matrix(X, "X", expected_cols=self.n_features_in_)
        z, _ = self.flow_.forward(X, self._condition(condition, X.shape[0]))
        return z.data

    def inverse_transform(self, Z, condition=None):
        Z = check_matrix(Z, "Z", expected_cols=self.n_features_in_)
        return self.flow_.inverse(Z, self._condition(condition, Z.shape[0]))

    def log_likelihood(self, X, condition=None):
        """Per-sample log p(x | condition) via the change of variables."""
        X = check_matrix(X, "X", expected_cols=self.n_features_in_)
        z, log_det = self.flow_.forward(X, self._condition(condition, X.shape[0]))
        log_q = -0.5 * (np.sum(z.data ** 2, axis=-1)
                        + self.n_features_in_ * np.log(2.0 * np.pi))
        return log_q + log_det.data

    def score(self, X, condition=None):
        return float(np.mean(self.log_likelihood(X, condition)))
