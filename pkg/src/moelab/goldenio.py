"""Golden-vector file format.

A golden file is an 8-byte little-endian unsigned element count followed
by that many little-endian float64 values.  The format is deliberately
dumb so any language can produce or verify it.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import ShapeError

_HEADER = struct.Struct("<Q")


def encode_vector(values: np.ndarray) -> bytes:
    flat = np.ascontiguousarray(np.asarray(values, dtype=np.float64).ravel())
    return _HEADER.pack(flat.size) + flat.astype("<f8").tobytes()


def decode_vector(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise ShapeError("golden blob shorter than its header")
    (count,) = _HEADER.unpack_from(blob)
    expected = _HEADER.size + 8 * count
    if len(blob) != expected:
        raise ShapeError(f"golden blob has {len(blob)} bytes, header implies {expected}")
    return np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).copy()


def write_golden(path: str | Path, values: np.ndarray) -> str:
    """Write a golden file; returns the sha256 hex digest of its bytes."""
    blob = encode_vector(values)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def read_golden(path: str | Path) -> np.ndarray:
    return decode_vector(Path(path).read_bytes())


def digest_vector(values: np.ndarray) -> str:
    """sha256 of the encoded golden bytes (what write_golden would produce)."""
    return hashlib.sha256(encode_vector(values)).hexdigest()
