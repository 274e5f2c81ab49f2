from .wavio import AudioBuffer, WavFormatError, read_wav, write_wav
from .stft import ColaError, Spectrogram, StftConfig, istft, stft
from .filters import FAMILIES, UnstableFilterError, design_lowpass, lowpass
from .reverb import estimate_rt60, schroeder_curve, synthesize_rir
from .distort import (DistortionSpec, distort, mix_at_snr, sample_spec,
                      spec_from_manifest)

__all__ = [
    "AudioBuffer", "WavFormatError", "read_wav", "write_wav",
    "ColaError", "Spectrogram", "StftConfig", "istft", "stft",
    "FAMILIES", "UnstableFilterError", "design_lowpass", "lowpass",
    "estimate_rt60", "schroeder_curve", "synthesize_rir",
    "DistortionSpec", "distort", "mix_at_snr", "sample_spec", "spec_from_manifest",
]
