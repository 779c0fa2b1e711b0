"""Versioned binary checkpoints for parameter vectors.

Layout (all integers little-endian):

    b"HTRP"                      magic
    u32  format version
    u32  number of layout entries
    per entry:
        u16  name length, then UTF-8 name bytes
        u32  ndim, then ndim × u32 dims
    float64 × total size          raw parameter values
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch

from src.diffnet.params import Layout, ParamVector, layout_size
from src.errors import CheckpointIncompatibleError

MAGIC = b"HTRP"
FORMAT_VERSION = 1


def encode(params: ParamVector) -> bytes:
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(params.layout))]
    for name, shape in params.layout:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack(f"<I{len(shape)}I", len(shape), *shape))
    parts.append(np.asarray(params.numpy(), dtype="<f8").tobytes())
    return b"".join(parts)


def decode(blob: bytes) -> ParamVector:
    if blob[:4] != MAGIC:
        raise CheckpointIncompatibleError("not an HTRP checkpoint (bad magic bytes)")
    try:
        version, n_entries = struct.unpack_from("<II", blob, 4)
        if version != FORMAT_VERSION:
            raise CheckpointIncompatibleError(f"unsupported checkpoint version {version}")
        offset = 12
        entries: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(n_entries):
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            shape = struct.unpack_from(f"<{ndim}I", blob, offset)
            offset += 4 * ndim
            entries.append((name, tuple(shape)))
    except struct.error as e:
        raise CheckpointIncompatibleError(f"truncated checkpoint header: {e}") from e

    layout: Layout = tuple(entries)
    size = layout_size(layout)
    payload = blob[offset:]
    if len(payload) != 8 * size:
        raise CheckpointIncompatibleError(
            f"checkpoint payload holds {len(payload)} bytes, layout needs {8 * size}"
        )
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return ParamVector(torch.from_numpy(values.copy()), layout)


def save_checkpoint(params: ParamVector, path: Path) -> Path:
    path.write_bytes(encode(params))
    return path


def load_checkpoint(path: Path, expected: Layout | None = None) -> ParamVector:
    """Read a checkpoint, optionally insisting on a specific layout."""
    params = decode(path.read_bytes())
    if expected is not None and params.layout != expected:
        raise CheckpointIncompatibleError(
            f"{path.name}: layout {params.layout} does not match network layout {expected}"
        )
    return params
