"""Mono RIFF/WAVE reading and writing: 16-bit PCM and 32-bit float.

Hand-rolled because the stdlib module cannot write IEEE-float WAV files.
Unknown chunks are skipped on read; output files contain exactly a fmt
and a data chunk.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_PCM = 1
_IEEE_FLOAT = 3


class WavFormatError(ValueError):
    """Raised for files this reader does not understand."""


@dataclass
class AudioBuffer:
    """Mono audio as float64 samples (nominally in [-1, 1])."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"expected mono 1-d samples, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path) -> AudioBuffer:
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    offset = 12
    fmt = None
    data = None
    while offset + 8 <= len(blob):
        chunk_id = blob[offset:offset + 4]
        (chunk_size,) = struct.unpack_from("<I", blob, offset + 4)
        body = blob[offset + 8:offset + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise WavFormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        offset += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned
    if fmt is None or data is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")
    audio_format, channels, rate, _, _, bits = fmt
    if channels != 1:
        raise WavFormatError(f"{path}: only mono is supported, got {channels} channels")
    if audio_format == _PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise WavFormatError(
            f"{path}: unsupported encoding (format {audio_format}, {bits}-bit); "
            "expected 16-bit PCM or 32-bit float"
        )
    return AudioBuffer(samples=samples, sample_rate=rate)


def write_wav(path, audio: AudioBuffer, encoding: str = "float32") -> None:
    """Write mono WAV; encoding is "pcm16" or "float32"."""
    if encoding == "pcm16":
        audio_format, bits = _PCM, 16
        clipped = np.clip(audio.samples, -1.0, 32767.0 / 32768.0)
        payload = np.round(clipped * 32768.0).astype("<i2").tobytes()
    elif encoding == "float32":
        audio_format, bits = _IEEE_FLOAT, 32
        payload = audio.samples.astype("<f4").tobytes()
    else:
        raise ValueError(f"encoding must be 'pcm16' or 'float32', got {encoding!r}")
    block_align = bits // 8
    fmt_chunk = struct.pack(
        "<HHIIHH", audio_format, 1, audio.sample_rate,
        audio.sample_rate * block_align, block_align, bits,
    )
    body = b"".join([
        b"WAVE",
        b"fmt ", struct.pack("<I", len(fmt_chunk)), fmt_chunk,
        b"data", struct.pack("<I", len(payload)), payload,
    ])
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
