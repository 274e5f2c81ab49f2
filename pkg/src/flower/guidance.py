"""Gaussian guidance: extraction, sampling, injection, and the joint loss.

During training the guidance latent z comes from the conditional flow
applied to the clean target, conditioned on the field network's encoder
output; the flow's NLL pushes z toward a standard Gaussian and strips it
of condition information. At inference the flow is bypassed entirely and
z is drawn from N(0, I). Either way, z enters the field network through
two bias-free projections added onto its last two hidden layers, scaled
by 1 (constant mode) or by 1 - t (time-adaptive mode).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .autodiff import Linear, ShapeError, Tensor
from .flows.coupling import gaussian_nll

MODES = ("train", "infer")
SCALINGS = ("constant", "time-adaptive")


class GuidanceProjector:
    """Bias-free affine maps from the guidance latent to each injection site.

    Zero-initialized so injection starts inert and its strength is
    learned; bias-free so that z = 0 injects exactly nothing.
    """

    def __init__(self, latent_dim: int, site_dims, rng: np.random.Generator | None = None,
                 name: str = "guidance"):
        if rng is None:
            rng = np.random.default_rng(0)
        self.latent_dim = latent_dim
        self.site_dims = tuple(site_dims)
        self._maps = [
            Linear(latent_dim, width, rng, bias=False, zero_init=True,
                   name=f"{name}.proj{site}")
            for site, width in enumerate(self.site_dims)
        ]

    def project(self, site: int, z: Tensor) -> Tensor:
        return self._maps[site](z)

    def parameters(self):
        return [p for m in self._maps for p in m.parameters()]

    def named_parameters(self) -> dict[str, Tensor]:
        return {p.name: p for p in self.parameters()}


@dataclass(frozen=True)
class GuidanceContext:
    """Immutable guidance state threaded through field evaluations."""

    z: object  # Tensor during training, ndarray at inference
    mode: str
    projector: GuidanceProjector
    scaling: str = "constant"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.scaling not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}, got {self.scaling!r}")

    def scale(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return 1.0 - t if self.scaling == "time-adaptive" else np.ones_like(t)

    def with_z(self, z) -> "GuidanceContext":
        return replace(self, z=z)

    @property
    def z_tensor(self) -> Tensor:
        return self.z if isinstance(self.z, Tensor) else Tensor(self.z)


def extract_guidance(flow, x_clean, c_latent, projector: GuidanceProjector,
                     scaling: str = "constant") -> GuidanceContext:
    """Training-mode guidance: z = flow(x_clean | c_latent)."""
    x_clean = x_clean if isinstance(x_clean, Tensor) else Tensor(np.atleast_2d(x_clean))
    z, _ = flow.forward(x_clean, c_latent)
    return GuidanceContext(z=z, mode="train", projector=projector, scaling=scaling)


def sample_guidance(dim: int, seed, projector: GuidanceProjector,
                    scaling: str = "constant", n_items: int = 1) -> GuidanceContext:
    """Inference-mode guidance: z ~ N(0, I_dim), one row per item.

    `seed` may be an int or an existing Generator.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((n_items, dim))
    return GuidanceContext(z=z, mode="infer", projector=projector, scaling=scaling)


def inject(hidden: Tensor, ctx: GuidanceContext | None, site: int, t) -> Tensor:
    """hidden + scale(t) * projection_site(z); identity when ctx is None.

    When every scale is zero (time-adaptive at t=1) the input tensor is
    returned untouched, so the no-injection boundary is exact.
    """
    if ctx is None:
        return hidden
    scale = ctx.scale(t)
    if np.all(scale == 0.0):
        return hidden
    contribution = ctx.projector.project(site, ctx.z_tensor)
    if contribution.shape != hidden.shape:
        raise ShapeError(
            f"guidance projection for site {site} has shape {contribution.shape}, "
            f"hidden layer has shape {hidden.shape}"
        )
    if scale.ndim == 1:
        scale = scale[:, None]
    return hidden + contribution * Tensor(scale)


@dataclass
class JointLoss:
    """Combined objective: total is exactly l_unet + l_nf."""

    l_unet: Tensor
    l_nf: Tensor
    total: Tensor
    z: Tensor
    latent: Tensor


def joint_loss(field, flow, projector: GuidanceProjector, x_clean, y, path,
               rng: np.random.Generator, scaling: str = "constant",
               detach_latent: bool = False) -> JointLoss:
    """One training objective evaluation for the guided generative model.

    Runs the field encoder to get the conditioning latent, extracts z
    from the flow, injects it into the field decoder, and returns the
    generative loss plus the flow NLL. `path` selects the framework: an
    OtPath trains the vector field, a VeSde trains the score (with the
    field wrapped in its 1/sigma output scaling).

    With `detach_latent` the NLL sees the latent as a constant, so its
    gradients stop at the flow; by default they continue into the field
    encoder (joint training).
    """
    from .paths.ot import OtPath
    from .paths.sde import T_MIN, VeSde

    x_clean = np.atleast_2d(np.asarray(x_clean, dtype=np.float64))
    n = x_clean.shape[0]
    if isinstance(path, OtPath):
        t = rng.uniform(0.0, 1.0, size=n)
        x0 = rng.standard_normal(x_clean.shape)
        x_t = path.interpolate(x0, x_clean, t)
        target = Tensor(path.target_field(x0, x_clean))
        out_scale = None
    elif isinstance(path, VeSde):
        t = rng.uniform(T_MIN, 1.0, size=n)
        noise = rng.standard_normal(x_clean.shape)
        x_t = path.perturb(x_clean, t, noise)
        sigma = path.sigma(t)[:, None]
        target = Tensor(-noise / sigma)
        out_scale = Tensor(1.0 / sigma)
    else:
        raise TypeError(f"path must be OtPath or VeSde, got {type(path).__name__}")

    latent = field.encode(x_t, y, t)
    z, log_det = flow.forward(Tensor(x_clean),
                              latent.detach() if detach_latent else latent)
    l_nf = gaussian_nll(z, log_det, flow.dim)

    ctx = GuidanceContext(z=z, mode="train", projector=projector, scaling=scaling)
    prediction = field.decode(latent, t, ctx)
    if out_scale is not None:
        prediction = prediction * out_scale
    l_unet = (prediction - target).square().sum(axis=-1).mean()
    return JointLoss(l_unet=l_unet, l_nf=l_nf, total=l_unet + l_nf, z=z, latent=latent)
