"""Gaussian guidance from a conditional spline flow, injected into
score- and flow-matching generative models, with the synthetic speech
distortion pipeline and objective metrics used to exercise them."""

__version__ = "0.1.0"

from .autodiff import Adam, Mlp, Tensor
from .flows import (ConditionalSplineFlow, FlowStack, mi_upper_bound_check,
                    nf_loss, rq_spline_forward, rq_spline_inverse)
from .guidance import (GuidanceContext, GuidanceProjector, extract_guidance,
                       inject, joint_loss, sample_guidance)
from .paths import (FieldNetwork, OtPath, SamplerConfig, ScoreField, VeSde,
                    euler_sample, fm_loss, reverse_sde_sample,
                    score_matching_loss, time_embedding)
from .restoration import (FlowMatchingRestorer, ScoreMatchingRestorer,
                          distort_toy, make_toy_clean, make_toy_task)

__all__ = [
    "Adam", "Mlp", "Tensor",
    "ConditionalSplineFlow", "FlowStack", "mi_upper_bound_check", "nf_loss",
    "rq_spline_forward", "rq_spline_inverse",
    "GuidanceContext", "GuidanceProjector", "extract_guidance", "inject",
    "joint_loss", "sample_guidance",
    "FieldNetwork", "OtPath", "SamplerConfig", "ScoreField", "VeSde",
    "euler_sample", "fm_loss", "reverse_sde_sample", "score_matching_loss",
    "time_embedding",
    "FlowMatchingRestorer", "ScoreMatchingRestorer", "distort_toy",
    "make_toy_clean", "make_toy_task",
]
