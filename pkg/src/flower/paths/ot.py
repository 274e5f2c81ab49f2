"""Flow matching on the optimal-transport path, with the Euler sampler.

The path interpolates linearly between a standard-normal draw x0 and a
data point x1: mean t*x1, scale 1 - (1-sigma_min)*t. Its generating
vector field x1 - (1-sigma_min)*x0 carries no time dependence, which is
what makes few-step Euler sampling effective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor
from .sde import _as_array, _maybe_resample


@dataclass
class OtPath:
    sigma_min: float = 1e-4

    def __post_init__(self):
        if not 0 <= self.sigma_min < 1:
            raise ValueError(f"sigma_min must lie in [0, 1), got {self.sigma_min}")

    def scale(self, t):
        return 1.0 - (1.0 - self.sigma_min) * np.asarray(t, dtype=np.float64)

    def interpolate(self, x0, x1, t) -> np.ndarray:
        """Point on the path: t*x1 + (1 - (1-sigma_min)*t)*x0."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise ValueError(f"t must lie in [0, 1], got range "
                             f"[{t.min():.4g}, {t.max():.4g}]")
        x0 = np.asarray(x0, dtype=np.float64)
        x1 = np.asarray(x1, dtype=np.float64)
        tt, ss = t, self.scale(t)
        if x0.ndim == 2 and tt.ndim == 1:
            tt, ss = tt[:, None], ss[:, None]
        return tt * x1 + ss * x0

    def target_field(self, x0, x1) -> np.ndarray:
        """Generating field x1 - (1-sigma_min)*x0; constant in t by design."""
        x0 = np.asarray(x0, dtype=np.float64)
        x1 = np.asarray(x1, dtype=np.float64)
        if x0.shape != x1.shape:
            raise ValueError(f"endpoint shapes differ: {x0.shape} vs {x1.shape}")
        return x1 - (1.0 - self.sigma_min) * x0


@dataclass
class SamplerConfig:
    """Settings shared by the Euler and reverse-SDE samplers."""

    n_steps: int = 25
    seed: int = 0
    resample_guidance: bool = False

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be at least 1, got {self.n_steps}")


def fm_loss(model, x1, y, path: OtPath, rng: np.random.Generator,
            guidance=None, t=None, x0=None):
    """Mean squared error between the model field and the target field.

    x0 is drawn standard normal and t uniform on [0, 1] per item unless
    supplied. Returns a scalar Tensor.
    """
    x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
    n = x1.shape[0]
    if t is None:
        t = rng.uniform(0.0, 1.0, size=n)
    t = np.asarray(t, dtype=np.float64)
    if x0 is None:
        x0 = rng.standard_normal(x1.shape)
    x_t = path.interpolate(x0, x1, t)
    target = Tensor(path.target_field(x0, x1))
    out = model(x_t, y, t, guidance)
    if not isinstance(out, Tensor):
        out = Tensor(np.asarray(out, dtype=np.float64))
    return (out - target).square().sum(axis=-1).mean()


def euler_sample(model, y, config: SamplerConfig, shape=None, guidance=None,
                 return_trajectory: bool = False):
    """Integrate x <- x + v/N over exactly N steps from t=0 to t=1.

    Starts from a seeded standard-normal draw; deterministic given
    (config, model parameters). With `return_trajectory` the full state
    history (N+1 points including the start) comes back as well.
    """
    if shape is None:
        shape = (np.asarray(y).shape[0], model.data_dim)
    rng = np.random.default_rng(config.seed)
    x = rng.standard_normal(shape)
    dt = 1.0 / config.n_steps
    trajectory = [x.copy()] if return_trajectory else None
    for k in range(config.n_steps):
        t = k * dt
        guidance = _maybe_resample(guidance, config, rng)
        v = _as_array(model(x, y, np.full(shape[0], t), guidance))
        x = x + dt * v
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite state at Euler step {k} (t={t:.4f})")
        if return_trajectory:
            trajectory.append(x.copy())
    if return_trajectory:
        return x, np.asarray(trajectory)
    return x
