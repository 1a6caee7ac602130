import struct

import numpy as np
import pytest

from oodr.tensorfile import (
    BadDtypeError,
    BadMagicError,
    BadVersionError,
    TruncatedPayloadError,
    read_tensor,
    tensor_header,
    write_tensor,
)


def test_float_round_trip_bit_exact(tmp_path):
    arr = np.array([[1.5, -2.25], [3.0, 0.1]], dtype=np.float32)
    path = tmp_path / "t.oodt"
    write_tensor(arr, path)
    back = read_tensor(path)
    assert back.dtype == np.float32
    assert back.tobytes() == arr.tobytes()


def test_uint8_round_trip(tmp_path):
    arr = (np.arange(24, dtype=np.uint8)).reshape(2, 3, 4)
    path = tmp_path / "t.oodt"
    write_tensor(arr, path)
    back = read_tensor(path)
    assert back.dtype == np.uint8
    assert back.shape == (2, 3, 4)
    assert np.array_equal(back, arr)


def test_random_round_trips(tmp_path):
    rng = np.random.default_rng(0)
    for i in range(25):
        ndim = int(rng.integers(1, 5))
        shape = tuple(int(rng.integers(1, 6)) for _ in range(ndim))
        if rng.random() < 0.5:
            arr = rng.standard_normal(shape).astype(np.float32)
        else:
            arr = rng.integers(0, 256, shape).astype(np.uint8)
        path = tmp_path / f"t{i}.oodt"
        write_tensor(arr, path)
        assert read_tensor(path).tobytes() == arr.tobytes()


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.oodt"
    path.write_bytes(b"XXXX" + bytes([1, 1, 1]) + struct.pack("<I", 1) + b"\x00" * 4)
    with pytest.raises(BadMagicError):
        read_tensor(path)


def test_bad_version(tmp_path):
    path = tmp_path / "bad.oodt"
    path.write_bytes(b"OODT" + bytes([9, 1, 1]) + struct.pack("<I", 1) + b"\x00" * 4)
    with pytest.raises(BadVersionError):
        read_tensor(path)


def test_bad_dtype(tmp_path):
    path = tmp_path / "bad.oodt"
    path.write_bytes(b"OODT" + bytes([1, 7, 1]) + struct.pack("<I", 1) + b"\x00" * 4)
    with pytest.raises(BadDtypeError):
        read_tensor(path)


def test_truncated_payload(tmp_path):
    # dims 4x4 float32 needs 64 bytes; provide 15 values = 60
    path = tmp_path / "bad.oodt"
    path.write_bytes(b"OODT" + bytes([1, 1, 2]) + struct.pack("<II", 4, 4) + b"\x00" * 60)
    with pytest.raises(TruncatedPayloadError):
        read_tensor(path)


def test_excess_payload_rejected(tmp_path):
    path = tmp_path / "bad.oodt"
    path.write_bytes(b"OODT" + bytes([1, 2, 1]) + struct.pack("<I", 2) + b"\x00" * 3)
    with pytest.raises(TruncatedPayloadError):
        read_tensor(path)


def test_header_check_matches_read(tmp_path):
    arr = np.zeros((3, 5), dtype=np.float32)
    path = tmp_path / "t.oodt"
    write_tensor(arr, path)
    dtype, dims = tensor_header(path)
    assert dtype == np.dtype("<f4")
    assert dims == (3, 5)


def test_write_rejects_unsupported_dtype(tmp_path):
    with pytest.raises(BadDtypeError):
        write_tensor(np.zeros(3, dtype=np.int64), tmp_path / "t.oodt")
