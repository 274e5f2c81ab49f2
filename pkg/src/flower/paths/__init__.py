from .field import FieldNetwork, time_embedding
from .sde import VeSde, ScoreField, score_matching_loss, reverse_sde_sample
from .ot import OtPath, SamplerConfig, fm_loss, euler_sample

__all__ = [
    "FieldNetwork", "time_embedding",
    "VeSde", "ScoreField", "score_matching_loss", "reverse_sde_sample",
    "OtPath", "SamplerConfig", "fm_loss", "euler_sample",
]
