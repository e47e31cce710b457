"""Flat float32 tensor files used to exchange golden planes between implementations.

Layout (little-endian throughout):
  bytes 0..3   magic b"TNS1"
  bytes 4..19  four uint32: height, width, channels, levels
  bytes 20..   height*width*channels float32 values, row-major, channel-last

`levels` is 0 for raw inputs and records the extraction depth for outputs.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"TNS1"
_HEADER = struct.Struct("<4sIIII")


def write_tensor(path, plane, levels: int = 0) -> None:
    arr = np.asarray(plane, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise DataError(f"tensor must be (H, W) or (H, W, C), got shape {arr.shape}")
    h, w, c = arr.shape
    payload = _HEADER.pack(MAGIC, h, w, c, levels) + arr.tobytes(order="C")
    Path(path).write_bytes(payload)


def read_tensor(path) -> tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"tensor file {path} truncated at {len(raw)} bytes")
    magic, h, w, c, levels = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"bad tensor magic {magic!r} in {path}")
    expected = _HEADER.size + 4 * h * w * c
    if len(raw) != expected:
        raise DataError(f"tensor file {path}: expected {expected} bytes, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(h, w, c)
    return data.copy(), levels
