"""Golden-vector file format round trips and layout."""

import struct

import numpy as np
import pytest

from moelab import ShapeError
from moelab.goldenio import (
    decode_vector,
    digest_vector,
    encode_vector,
    read_golden,
    write_golden,
)


def test_round_trip(tmp_path):
    values = np.array([[1.5, -2.25], [0.0, 1e-300]])
    path = tmp_path / "v.bin"
    digest = write_golden(path, values)
    back = read_golden(path)
    assert np.array_equal(back, values.ravel())
    assert digest == digest_vector(values)


def test_wire_layout_is_little_endian_with_count_header():
    blob = encode_vector(np.array([1.0, -1.0, 0.5]))
    assert len(blob) == 8 + 3 * 8
    assert struct.unpack("<Q", blob[:8])[0] == 3
    assert struct.unpack("<d", blob[8:16])[0] == 1.0
    assert struct.unpack("<d", blob[16:24])[0] == -1.0


def test_empty_vector():
    blob = encode_vector(np.array([]))
    assert blob == struct.pack("<Q", 0)
    assert decode_vector(blob).size == 0


def test_corrupt_blobs_rejected():
    good = encode_vector(np.array([1.0, 2.0]))
    with pytest.raises(ShapeError):
        decode_vector(good[:-4])        # truncated payload
    with pytest.raises(ShapeError):
        decode_vector(good + b"\x00" * 8)  # trailing junk
    with pytest.raises(ShapeError):
        decode_vector(b"\x01\x02")      # shorter than the header


def test_digest_tracks_content(tmp_path):
    a = digest_vector(np.array([1.0]))
    b = digest_vector(np.array([1.0 + 2**-52]))
    assert a != b
