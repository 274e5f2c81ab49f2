"""IIR low-pass filtering for bandwidth degradation.

Butterworth (maximally flat) and Chebyshev type I (equiripple passband)
families, designed as analog prototypes and mapped to biquad cascades by
the bilinear transform with frequency prewarping; scipy's second-order
section designs do exactly this. Filtering is single-pass and causal.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from .wavio import AudioBuffer

FAMILIES = ("butterworth", "chebyshev1")


class UnstableFilterError(ValueError):
    """A designed section has a pole on or outside the unit circle."""


def design_lowpass(cutoff_hz: float, sample_rate: int, family: str = "butterworth",
                   order: int = 8, ripple_db: float = 1.0) -> np.ndarray:
    """Return second-order sections for the requested low-pass design."""
    if not 0.0 < cutoff_hz < sample_rate / 2.0:
        raise ValueError(
            f"cutoff must lie in (0, {sample_rate / 2:.0f}) Hz, got {cutoff_hz}"
        )
    if order < 1:
        raise ValueError(f"filter order must be at least 1, got {order}")
    if family == "butterworth":
        sos = signal.butter(order, cutoff_hz, btype="low", fs=sample_rate, output="sos")
    elif family == "chebyshev1":
        sos = signal.cheby1(order, ripple_db, cutoff_hz, btype="low",
                            fs=sample_rate, output="sos")
    else:
        raise ValueError(f"filter family must be one of {FAMILIES}, got {family!r}")
    for section in sos:
        poles = np.roots(section[3:])
        if np.any(np.abs(poles) >= 1.0):
            raise UnstableFilterError(
                f"{family} order {order} at {cutoff_hz} Hz produced an unstable "
                f"pole (|p| = {np.abs(poles).max():.6f})"
            )
    return sos


def lowpass(audio: AudioBuffer, cutoff_hz: float, family: str = "butterworth",
            order: int = 8, ripple_db: float = 1.0) -> AudioBuffer:
    sos = design_lowpass(cutoff_hz, audio.sample_rate, family, order, ripple_db)
    return AudioBuffer(samples=signal.sosfilt(sos, audio.samples),
                       sample_rate=audio.sample_rate)
