"""Synthetic room impulse responses with controlled decay time.

The RIR model is exponentially decaying white Gaussian noise: the
envelope exp(-3 ln(10) * k / (rt60 * fs)) loses 60 dB of power over rt60
seconds, which is the one acoustic property the distortion pipeline
varies. Decay estimation uses Schroeder backward integration with a T20
line fit (the -5..-25 dB stretch extrapolated to 60 dB).
"""

from __future__ import annotations

import numpy as np

from .wavio import AudioBuffer

_DECAY = 3.0 * np.log(10.0)  # 60 dB of power decay per rt60 in nepers


def synthesize_rir(rt60_s: float, length_s: float, seed: int,
                   sample_rate: int = 16000) -> AudioBuffer:
    """Unit-energy decaying-noise impulse response.

    rt60_s == 0 degenerates to a single-sample delta (no reverberation).
    """
    if rt60_s < 0:
        raise ValueError(f"rt60 must be non-negative, got {rt60_s}")
    if rt60_s == 0.0:
        return AudioBuffer(samples=np.array([1.0]), sample_rate=sample_rate)
    n = max(int(round(length_s * sample_rate)), 8)
    k = np.arange(n)
    envelope = np.exp(-k * _DECAY / (rt60_s * sample_rate))
    rir = np.random.default_rng(seed).standard_normal(n) * envelope
    rir /= np.sqrt(np.sum(rir ** 2))
    return AudioBuffer(samples=rir, sample_rate=sample_rate)


def schroeder_curve(rir: AudioBuffer) -> np.ndarray:
    """Energy decay curve in dB: backward-integrated squared response."""
    energy = rir.samples ** 2
    edc = np.cumsum(energy[::-1])[::-1]
    edc = edc / edc[0]
    return 10.0 * np.log10(np.maximum(edc, 1e-300))


def estimate_rt60(rir: AudioBuffer, fit_range_db=(-5.0, -25.0)) -> float:
    """RT60 from a T20-style line fit on the Schroeder curve."""
    high, low = fit_range_db
    edc = schroeder_curve(rir)
    mask = (edc <= high) & (edc >= low)
    if np.count_nonzero(mask) < 2:
        raise ValueError(
            f"decay curve never spans [{high}, {low}] dB; impulse response too short"
        )
    t = np.arange(len(edc))[mask] / rir.sample_rate
    slope, _ = np.polyfit(t, edc[mask], 1)
    if slope >= 0:
        raise ValueError("energy decay curve is not decreasing; cannot fit RT60")
    return -60.0 / slope
