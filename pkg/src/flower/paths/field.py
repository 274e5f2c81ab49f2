"""Conditional field network shared by the score and flow-matching paths.

A small MLP standing in for a full conditional U-Net: it consumes the
diffused state, the distorted observation and a sinusoidal embedding of
the time step, and exposes the same conditioning surface: a designated
latent (the analog of the deepest encoder layer) plus two injection
sites on the last two hidden layers where guidance is summed in.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Linear, Tensor, concat
from .. import guidance as _guidance


def time_embedding(t, dim: int = 8) -> np.ndarray:
    """Sinusoidal features of t in [0, 1]: pairs sin/cos at octave frequencies."""
    if dim % 2 != 0 or dim < 2:
        raise ValueError(f"time embedding dim must be a positive even number, got {dim}")
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    freqs = np.pi * 2.0 ** np.arange(dim // 2)
    angles = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


class FieldNetwork:
    """MLP field v(x_t, y, t) with guidance hooks on its last two layers.

    `hidden` needs at least three widths: everything up to the
    antepenultimate layer acts as the encoder whose output is the
    conditioning latent; the final two hidden layers are the injection
    sites. Output dimension equals the state dimension.
    """

    def __init__(self, data_dim: int, cond_dim: int, hidden=(64, 64, 64),
                 time_dim: int = 8, rng: np.random.Generator | None = None,
                 name: str = "field"):
        hidden = tuple(int(h) for h in hidden)
        if len(hidden) < 3:
            raise ValueError(
                f"need at least 3 hidden layers (encoder + two injection sites), "
                f"got {hidden}"
            )
        if rng is None:
            rng = np.random.default_rng(0)
        self.data_dim = data_dim
        self.cond_dim = cond_dim
        self.hidden = hidden
        self.time_dim = time_dim
        in_dim = data_dim + cond_dim + time_dim
        widths = (in_dim,) + hidden
        self._encoder = [
            Linear(widths[i], widths[i + 1], rng, name=f"{name}.enc{i}")
            for i in range(len(hidden) - 2)
        ]
        self._decoder = [
            Linear(hidden[-3], hidden[-2], rng, name=f"{name}.dec0"),
            Linear(hidden[-2], hidden[-1], rng, name=f"{name}.dec1"),
        ]
        self._out = Linear(hidden[-1], data_dim, rng, name=f"{name}.out")

    @property
    def latent_dim(self) -> int:
        return self.hidden[-3]

    @property
    def site_dims(self) -> tuple:
        return (self.hidden[-2], self.hidden[-1])

    def encode(self, x_t, y, t) -> Tensor:
        """Hidden representation used as the flow condition."""
        x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
        parts = [Tensor(x_t)]
        if self.cond_dim:
            if y is None:
                raise ValueError(f"field is conditional (cond_dim={self.cond_dim}) "
                                 "but y is None")
            parts.append(Tensor(np.atleast_2d(np.asarray(y, dtype=np.float64))))
        parts.append(Tensor(time_embedding(t, self.time_dim)))
        h = concat(parts, axis=-1)
        for layer in self._encoder:
            h = layer(h).tanh()
        return h

    def decode(self, latent: Tensor, t, guidance=None) -> Tensor:
        """Run the injection layers and output head on an encoded latent."""
        h = latent
        for site, layer in enumerate(self._decoder):
            h = layer(h).tanh()
            h = _guidance.inject(h, guidance, site, t)
        return self._out(h)

    def __call__(self, x_t, y, t, guidance=None) -> Tensor:
        return self.decode(self.encode(x_t, y, t), t, guidance)

    def parameters(self):
        layers = self._encoder + self._decoder + [self._out]
        return [p for layer in layers for p in layer.parameters()]

    def named_parameters(self) -> dict[str, Tensor]:
        return {p.name: p for p in self.parameters()}
