"""Flat binary checkpoint format for named parameter tensors.

Layout (all integers little-endian):

    magic   8 bytes  b"FLWRCKPT"
    version u32      currently 1
    count   u32      number of tensors
    per tensor:
        name_len u16, name utf-8
        ndim     u8,  dims as u32 each
        values   float64 little-endian, row-major

Values are always written as 64-bit floats regardless of platform.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .tensor import Tensor

MAGIC = b"FLWRCKPT"
VERSION = 1


class CheckpointError(ValueError):
    """Raised on malformed or incompatible checkpoint files."""


def save_checkpoint(path, tensors: dict) -> None:
    """Write ``{name: array-or-Tensor}`` to `path` atomically."""
    path = Path(path)
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, value in tensors.items():
        data = np.asarray(value.data if isinstance(value, Tensor) else value,
                          dtype=np.float64)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.astype("<f8").tobytes())
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)


def load_checkpoint(path) -> dict:
    """Read a checkpoint back as ``{name: float64 ndarray}``."""
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    offset = 16
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
        n_values = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(blob, dtype="<f8", count=n_values, offset=offset)
        offset += 8 * n_values
        out[name] = values.reshape(shape).astype(np.float64)
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return out


def restore_parameters(named_params: dict, state: dict) -> None:
    """Copy checkpoint arrays into live parameter tensors, checking shapes."""
    for name, param in named_params.items():
        if name not in state:
            raise CheckpointError(f"checkpoint is missing tensor {name!r}")
        value = state[name]
        if value.shape != param.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: checkpoint {value.shape}, "
                f"parameter {param.data.shape}"
            )
        param.data[...] = value
