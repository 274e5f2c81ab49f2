"""Short-time Fourier analysis with least-squares overlap-add synthesis.

Defaults follow the restoration setup: 510-sample periodic Hann window,
hop 128, FFT length equal to the window (256 bins at 16 kHz). Frames are
not centered, so perfect reconstruction holds on the interior where the
window overlap is complete.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .wavio import AudioBuffer


class ColaError(ValueError):
    """Window/hop combination cannot be inverted by overlap-add."""


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 510
    hop: int = 128
    window: str = "hann"
    fft_len: int | None = None

    def __post_init__(self):
        if self.window_len <= 0 or self.hop <= 0:
            raise ValueError("window_len and hop must be positive")
        if self.hop > self.window_len:
            raise ColaError(
                f"hop {self.hop} exceeds window length {self.window_len}: "
                "frames would leave gaps and overlap-add cannot reconstruct"
            )
        if self.fft_len is not None and self.fft_len < self.window_len:
            raise ValueError("fft_len must be at least window_len")
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")
        # reject window/hop pairs whose squared-window overlap-add has holes
        w2 = self.window_array() ** 2
        span = 4 * self.window_len
        ola = np.zeros(span + self.window_len)
        for start in range(0, span, self.hop):
            ola[start:start + self.window_len] += w2
        interior = ola[self.window_len:span]
        if interior.min() < 1e-8:
            raise ColaError(
                f"window {self.window!r} length {self.window_len} with hop "
                f"{self.hop} fails the overlap-add condition"
            )

    @property
    def n_fft(self) -> int:
        return self.fft_len if self.fft_len is not None else self.window_len

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def window_array(self) -> np.ndarray:
        # periodic Hann
        n = np.arange(self.window_len)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.window_len)

    def bin_frequencies(self, sample_rate: int) -> np.ndarray:
        return np.arange(self.n_bins) * sample_rate / self.n_fft


@dataclass
class Spectrogram:
    """Complex STFT values, shape (frames, bins)."""

    values: np.ndarray
    config: StftConfig
    sample_rate: int

    @property
    def bin_frequencies(self) -> np.ndarray:
        return self.config.bin_frequencies(self.sample_rate)


def stft(audio: AudioBuffer, config: StftConfig | None = None) -> Spectrogram:
    if config is None:
        config = StftConfig()
    x = audio.samples
    if len(x) < config.window_len:
        raise ValueError(
            f"audio has {len(x)} samples, need at least window_len={config.window_len}"
        )
    frames = np.lib.stride_tricks.sliding_window_view(x, config.window_len)[::config.hop]
    values = np.fft.rfft(frames * config.window_array(), n=config.n_fft, axis=1)
    return Spectrogram(values=values, config=config, sample_rate=audio.sample_rate)


def istft(spec: Spectrogram) -> AudioBuffer:
    """Least-squares inverse: windowed overlap-add over the squared window."""
    config = spec.config
    w = config.window_array()
    frames = np.fft.irfft(spec.values, n=config.n_fft, axis=1)[:, :config.window_len]
    n_frames = frames.shape[0]
    length = config.window_len + (n_frames - 1) * config.hop
    acc = np.zeros(length)
    den = np.zeros(length)
    for m in range(n_frames):
        start = m * config.hop
        acc[start:start + config.window_len] += w * frames[m]
        den[start:start + config.window_len] += w * w
    out = acc / np.maximum(den, 1e-12)
    return AudioBuffer(samples=out, sample_rate=spec.sample_rate)
