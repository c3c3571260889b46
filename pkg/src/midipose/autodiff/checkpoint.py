"""MDPW checkpoint files.

Layout (little-endian)::

    b"MDPW"  u32 version  u32 n_params
    n_params x { u32 name_len, name (utf-8), u32 rank, u32 dims[rank], f32 data }
"""
from __future__ import annotations

import struct
from typing import Mapping

import numpy as np

MAGIC = b"MDPW"
VERSION = 1


class CheckpointFormatError(ValueError):
    pass


def encode_checkpoint(params: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, value in params.items():
        arr = np.asarray(value)
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_checkpoint(blob: bytes) -> dict[str, np.ndarray]:
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CheckpointFormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", blob, off)
            off += 4
            name = blob[off : off + n].decode("utf-8")
            if len(name.encode("utf-8")) != n:
                raise CheckpointFormatError("truncated checkpoint: parameter name")
            off += n
            (rank,) = struct.unpack_from("<I", blob, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", blob, off)
            off += 4 * rank
            size = int(np.prod(dims, dtype=np.int64))
            if off + 4 * size > len(blob):
                raise CheckpointFormatError(f"truncated checkpoint: data for {name}")
            out[name] = np.frombuffer(blob, dtype="<f4", count=size, offset=off).astype(np.float64).reshape(dims)
            off += 4 * size
    except struct.error as exc:
        raise CheckpointFormatError(f"truncated checkpoint: {exc}") from None
    if off != len(blob):
        raise CheckpointFormatError(f"trailing data: {len(blob) - off} unexpected bytes")
    return out


def save_checkpoint(params: Mapping[str, np.ndarray], path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_checkpoint(params))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())
