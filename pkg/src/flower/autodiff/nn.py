"""Small fully-connected networks on top of the autodiff tensor."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

_ACTIVATIONS = ("tanh", "softplus", "identity")


def _apply_activation(x: Tensor, tag: str) -> Tensor:
    if tag == "tanh":
        return x.tanh()
    if tag == "softplus":
        return x.softplus()
    if tag == "identity":
        return x
    raise ValueError(f"unknown activation {tag!r}, expected one of {_ACTIVATIONS}")


class Linear:
    """Affine map y = x W + b. Set ``bias=False`` for a pure linear map."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 bias: bool = True, zero_init: bool = False, name: str = "linear"):
        if zero_init:
            w = np.zeros((in_dim, out_dim))
        else:
            w = rng.standard_normal((in_dim, out_dim)) / np.sqrt(in_dim)
        self.weight = Tensor(w, requires_grad=True, name=f"{name}.weight")
        self.bias = None
        if bias:
            self.bias = Tensor(np.zeros(out_dim), requires_grad=True, name=f"{name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        out = x.matmul(self.weight)
        if self.bias is not None:
            out = out + self.bias
        return out

    def parameters(self) -> list[Tensor]:
        return [self.weight] if self.bias is None else [self.weight, self.bias]


class Mlp:
    """Stack of Linear layers with a per-layer activation tag.

    `widths` lists every layer size including input and output, so
    ``Mlp([4, 32, 2])`` has one hidden layer. Activations default to tanh
    on hidden layers and identity on the output. ``zero_init_last`` zeroes
    the final layer so the network starts as the constant-zero map.
    """

    def __init__(self, widths, activations=None, rng: np.random.Generator | None = None,
                 zero_init_last: bool = False, name: str = "mlp"):
        widths = list(widths)
        if len(widths) < 2:
            raise ValueError("Mlp needs at least an input and an output width")
        if any(w <= 0 for w in widths):
            raise ValueError(f"layer widths must be positive, got {widths}")
        if rng is None:
            rng = np.random.default_rng(0)
        n_layers = len(widths) - 1
        if activations is None:
            activations = ["tanh"] * (n_layers - 1) + ["identity"]
        if len(activations) != n_layers:
            raise ValueError(f"expected {n_layers} activation tags, got {len(activations)}")
        for tag in activations:
            if tag not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {tag!r}, expected one of {_ACTIVATIONS}")
        self.widths = widths
        self.activations = list(activations)
        self.name = name
        self.layers = []
        for i in range(n_layers):
            self.layers.append(Linear(
                widths[i], widths[i + 1], rng,
                zero_init=zero_init_last and i == n_layers - 1,
                name=f"{name}.layer{i}",
            ))

    def __call__(self, x: Tensor) -> Tensor:
        for layer, tag in zip(self.layers, self.activations):
            x = _apply_activation(layer(x), tag)
        return x

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]

    def named_parameters(self) -> dict[str, Tensor]:
        return {p.name: p for p in self.parameters()}
