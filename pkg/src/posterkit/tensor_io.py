"""Flat binary tensor files: little-endian uint32 rank, uint32 dims, then row-major float32 data."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np


def write_tensor(path: str | Path, array: np.ndarray) -> None:
    array = np.ascontiguousarray(array, dtype="<f4")
    header = struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape)
    Path(path).write_bytes(header + array.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise ValueError(f"{path}: truncated header")
    (ndim,) = struct.unpack_from("<I", data, 0)
    offset = 4 + 4 * ndim
    if len(data) < offset:
        raise ValueError(f"{path}: truncated shape header")
    shape = struct.unpack_from(f"<{ndim}I", data, 4)
    count = int(np.prod(shape, dtype=np.int64))
    if len(data) - offset != 4 * count:
        raise ValueError(f"{path}: expected {count} float32 values, found {(len(data) - offset) / 4:g}")
    return np.frombuffer(data, dtype="<f4", offset=offset).reshape(shape).astype(np.float64)
