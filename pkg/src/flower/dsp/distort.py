"""The multi-distortion pipeline: reverberation, band limiting, noise.

A distorted observation is built as lowpass(clean * rir) + noise. Note
the order: noise is added after the reverberant speech is filtered, so
the noise itself keeps its full bandwidth. Every random choice is pinned
by seeds recorded in the manifest, making any output exactly replayable.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import fftconvolve

from .filters import FAMILIES, lowpass
from .reverb import synthesize_rir
from .wavio import AudioBuffer

# sampling ranges for randomly drawn distortions
SNR_RANGE_DB = (0.0, 20.0)
RT60_RANGE_S = (0.3, 0.9)
CUTOFF_RANGE_HZ = (2000.0, 4000.0)


@dataclass
class DistortionSpec:
    """Concrete recipe for one distorted utterance.

    `snr_db` may be ``math.inf`` (or None) to bypass the noise stage.
    Randomly drawn specs stay inside the module ranges above; direct
    construction only checks physical validity so degenerate settings
    (delta RIR, near-Nyquist cutoff) remain available.
    """

    snr_db: float | None
    rt60_s: float
    cutoff_hz: float
    filter_family: str = "butterworth"
    filter_order: int = 8
    noise_seed: int = 0
    rir_seed: int = 0

    def __post_init__(self):
        if self.snr_db is not None and not math.isinf(self.snr_db) and self.snr_db < 0:
            raise ValueError(f"snr_db must be non-negative, got {self.snr_db}")
        if self.rt60_s < 0:
            raise ValueError(f"rt60_s must be non-negative, got {self.rt60_s}")
        if self.cutoff_hz <= 0:
            raise ValueError(f"cutoff_hz must be positive, got {self.cutoff_hz}")
        if self.filter_family not in FAMILIES:
            raise ValueError(f"filter_family must be one of {FAMILIES}, "
                             f"got {self.filter_family!r}")

    @property
    def noise_bypassed(self) -> bool:
        return self.snr_db is None or math.isinf(self.snr_db)


def sample_spec(rng: np.random.Generator, filter_order: int = 8) -> DistortionSpec:
    """Draw a spec uniformly from the documented parameter ranges."""
    family = FAMILIES[int(rng.integers(0, len(FAMILIES)))]
    return DistortionSpec(
        snr_db=float(rng.uniform(*SNR_RANGE_DB)),
        rt60_s=float(rng.uniform(*RT60_RANGE_S)),
        cutoff_hz=float(rng.uniform(*CUTOFF_RANGE_HZ)),
        filter_family=family,
        filter_order=filter_order,
        noise_seed=int(rng.integers(2 ** 31)),
        rir_seed=int(rng.integers(2 ** 31)),
    )


def mix_at_snr(speech: AudioBuffer, noise: AudioBuffer, snr_db: float):
    """Scale noise so the speech-to-noise power ratio is exactly snr_db.

    Noise is tiled or truncated (from the start) to the speech length.
    Returns (noisy buffer, applied noise gain). Power is measured over the
    full utterance.
    """
    s = speech.samples
    n = noise.samples
    if len(n) < len(s):
        n = np.tile(n, int(np.ceil(len(s) / len(n))))
    n = n[:len(s)]
    p_speech = np.mean(s ** 2)
    p_noise = np.mean(n ** 2)
    if p_speech == 0.0:
        raise ValueError("speech is silent; SNR is undefined")
    if p_noise == 0.0:
        raise ValueError("noise is silent; SNR is undefined")
    gain = np.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0)))
    return AudioBuffer(samples=s + gain * n, sample_rate=speech.sample_rate), float(gain)


def distort(clean: AudioBuffer, noise_src: AudioBuffer | None, spec: DistortionSpec):
    """Apply the full pipeline; returns (distorted buffer, manifest dict).

    The manifest records every parameter and seed; running distort again
    on the same inputs with an equal manifest reproduces the output
    bit-identically.
    """
    fs = clean.sample_rate
    rir = synthesize_rir(spec.rt60_s, length_s=max(spec.rt60_s, 0.1),
                         seed=spec.rir_seed, sample_rate=fs)
    reverberant = fftconvolve(clean.samples, rir.samples)[:len(clean.samples)]
    filtered = lowpass(AudioBuffer(reverberant, fs), spec.cutoff_hz,
                       family=spec.filter_family, order=spec.filter_order)

    gain = 0.0
    if spec.noise_bypassed:
        out = filtered
    else:
        if noise_src is None:
            raise ValueError("spec requests noise mixing but no noise source was given")
        if noise_src.sample_rate != fs:
            raise ValueError(f"noise sample rate {noise_src.sample_rate} != speech {fs}")
        segment = _pick_segment(noise_src.samples, len(clean.samples), spec.noise_seed)
        out, gain = mix_at_snr(filtered, AudioBuffer(segment, fs), spec.snr_db)

    manifest = dict(asdict(spec))
    manifest["snr_db"] = None if spec.noise_bypassed else spec.snr_db
    manifest["noise_gain"] = gain
    manifest["sample_rate"] = fs
    # room dimensions are part of the manifest schema for compatibility with
    # geometric simulators; the decaying-noise model does not use them
    manifest["room_dims_m"] = None
    return out, manifest


def _pick_segment(noise: np.ndarray, length: int, seed: int) -> np.ndarray:
    """Seeded noise segment: random offset, tiled when too short."""
    if len(noise) < length:
        noise = np.tile(noise, int(np.ceil(length / len(noise))))
    max_offset = len(noise) - length
    offset = int(np.random.default_rng(seed).integers(0, max_offset + 1))
    return noise[offset:offset + length]


def spec_from_manifest(manifest: dict) -> DistortionSpec:
    """Rebuild the spec recorded in a manifest row (for exact replay)."""
    snr = manifest["snr_db"]
    return DistortionSpec(
        snr_db=math.inf if snr is None else float(snr),
        rt60_s=float(manifest["rt60_s"]),
        cutoff_hz=float(manifest["cutoff_hz"]),
        filter_family=manifest["filter_family"],
        filter_order=int(manifest["filter_order"]),
        noise_seed=int(manifest["noise_seed"]),
        rir_seed=int(manifest["rir_seed"]),
    )
