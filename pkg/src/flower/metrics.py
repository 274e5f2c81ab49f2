"""Objective evaluation: log-spectral distance and SI-SDR.

LSD compares log power spectra frame by frame:

    LSD = mean_frames sqrt( mean_bins (log10|S_ref|^2 - log10|S_est|^2)^2 )

with magnitudes floored at 1e-10 before the log. The band variants
restrict the bin average: bins at or above 4 kHz form the high band,
everything below is the low band, so the two partition the spectrum.

SI-SDR projects the estimate onto the reference and reports the energy
ratio of the projection to the residual in dB, capped at +100 dB for
numerically exact (scaled) matches.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import AudioBuffer, StftConfig, stft

SPECTRAL_FLOOR = 1e-10
BAND_SPLIT_HZ = 4000.0
SI_SDR_CAP_DB = 100.0

BANDS = ("full", "high", "low")


def _trim_pair(ref: AudioBuffer, est: AudioBuffer):
    if ref.sample_rate != est.sample_rate:
        raise ValueError(f"sample rates differ: {ref.sample_rate} vs {est.sample_rate}")
    n = min(len(ref.samples), len(est.samples))
    if n == 0:
        raise ValueError("signals have no overlap")
    return (AudioBuffer(ref.samples[:n], ref.sample_rate),
            AudioBuffer(est.samples[:n], est.sample_rate))


def band_mask(config: StftConfig, sample_rate: int, band: str) -> np.ndarray:
    freqs = config.bin_frequencies(sample_rate)
    if band == "full":
        return np.ones_like(freqs, dtype=bool)
    if band == "high":
        return freqs >= BAND_SPLIT_HZ
    if band == "low":
        return freqs < BAND_SPLIT_HZ
    raise ValueError(f"band must be one of {BANDS}, got {band!r}")


def lsd(ref: AudioBuffer, est: AudioBuffer, band: str = "full",
        config: StftConfig | None = None) -> float:
    """Log-spectral distance in dB-like log10 units over the chosen band."""
    if config is None:
        config = StftConfig()
    ref, est = _trim_pair(ref, est)
    mask = band_mask(config, ref.sample_rate, band)
    log_ref = 2.0 * np.log10(np.maximum(np.abs(stft(ref, config).values), SPECTRAL_FLOOR))
    log_est = 2.0 * np.log10(np.maximum(np.abs(stft(est, config).values), SPECTRAL_FLOOR))
    sq = (log_ref[:, mask] - log_est[:, mask]) ** 2
    return float(np.mean(np.sqrt(np.mean(sq, axis=1))))


def si_sdr(ref: AudioBuffer, est: AudioBuffer) -> float:
    """Scale-invariant signal-to-distortion ratio in dB."""
    ref, est = _trim_pair(ref, est)
    s, s_hat = ref.samples, est.samples
    ref_energy = np.dot(s, s)
    if ref_energy == 0.0:
        raise ValueError("reference signal is zero; SI-SDR is undefined")
    alpha = np.dot(s_hat, s) / ref_energy
    target = alpha * s
    residual = s_hat - target
    target_energy = np.dot(target, target)
    residual_energy = np.dot(residual, residual)
    if target_energy == 0.0:
        return -SI_SDR_CAP_DB
    if residual_energy == 0.0:
        return SI_SDR_CAP_DB
    value = 10.0 * np.log10(target_energy / residual_energy)
    return float(min(value, SI_SDR_CAP_DB))


@dataclass
class MetricRow:
    file: str
    lsd: float
    lsd_h: float
    lsd_l: float
    si_sdr: float


@dataclass
class MetricReport:
    rows: list
    means: dict

    def write_csv(self, path, config: StftConfig | None = None) -> None:
        if config is None:
            config = StftConfig()
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(f"# stft window_len={config.window_len} hop={config.hop} "
                     f"window={config.window}\n")
            writer = csv.writer(fh)
            writer.writerow(["file", "lsd", "lsd_h", "lsd_l", "si_sdr"])
            for row in self.rows:
                writer.writerow([row.file, f"{row.lsd:.6f}", f"{row.lsd_h:.6f}",
                                 f"{row.lsd_l:.6f}", f"{row.si_sdr:.6f}"])
            writer.writerow(["mean", f"{self.means['lsd']:.6f}",
                             f"{self.means['lsd_h']:.6f}",
                             f"{self.means['lsd_l']:.6f}",
                             f"{self.means['si_sdr']:.6f}"])


def evaluate_pair(ref: AudioBuffer, est: AudioBuffer, name: str = "",
                  config: StftConfig | None = None) -> MetricRow:
    return MetricRow(
        file=name,
        lsd=lsd(ref, est, "full", config),
        lsd_h=lsd(ref, est, "high", config),
        lsd_l=lsd(ref, est, "low", config),
        si_sdr=si_sdr(ref, est),
    )


def evaluate_directories(ref_dir, est_dir, config: StftConfig | None = None) -> MetricReport:
    """Evaluate WAV pairs matched by filename across two directories."""
    from .dsp import read_wav

    ref_dir, est_dir = Path(ref_dir), Path(est_dir)
    ref_files = {p.name for p in ref_dir.glob("*.wav")}
    est_files = {p.name for p in est_dir.glob("*.wav")}
    common = sorted(ref_files & est_files)
    if not common:
        raise ValueError(f"no matching .wav files between {ref_dir} and {est_dir}")
    rows = [evaluate_pair(read_wav(ref_dir / name), read_wav(est_dir / name),
                          name=name, config=config)
            for name in common]
    means = {
        key: float(np.mean([getattr(r, key) for r in rows]))
        for key in ("lsd", "lsd_h", "lsd_l", "si_sdr")
    }
    return MetricReport(rows=rows, means=means)
