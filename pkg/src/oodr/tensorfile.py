"""Self-describing binary tensor container (magic "OODT").

Layout: magic (4 bytes) | version u8 | dtype u8 | ndim u8 | dims ndim*u32 LE
| payload, row-major little-endian. dtype 1 = float32, 2 = uint8.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"OODT"
VERSION = 1

_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("u1")}
_CODES = {np.dtype("float32"): 1, np.dtype("uint8"): 2}


class BadMagicError(FormatError):
    code = "bad_magic"


class BadVersionError(FormatError):
    code = "bad_version"


class BadDtypeError(FormatError):
    code = "bad_dtype"


class TruncatedPayloadError(FormatError):
    code = "truncated_payload"


def write_tensor(array: np.ndarray, path: str | Path) -> None:
    """Write `array` (float32 or uint8, ndim >= 1) to `path`."""
    arr = np.asarray(array)
    if arr.dtype not in _CODES:
        raise BadDtypeError(f"unsupported dtype {arr.dtype}; use float32 or uint8")
    if arr.ndim < 1:
        raise FormatError("0-d arrays are not representable; reshape to (1,)")
    header = MAGIC + struct.pack("<BBB", VERSION, _CODES[arr.dtype], arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())


def tensor_header(path: str | Path) -> tuple[np.dtype, tuple[int, ...]]:
    """Validate the header and payload length without materializing the
    array; returns (dtype, dims)."""
    p = Path(path)
    size = p.stat().st_size
    with open(p, "rb") as fh:
        head = fh.read(7)
        if len(head) < 7:
            raise TruncatedPayloadError(f"{path}: file shorter than fixed header")
        if head[:4] != MAGIC:
            raise BadMagicError(f"{path}: bad magic {head[:4]!r}")
        version, dtype_code, ndim = struct.unpack("<BBB", head[4:7])
        if version != VERSION:
            raise BadVersionError(f"{path}: unsupported version {version}")
        if dtype_code not in _DTYPES:
            raise BadDtypeError(f"{path}: unknown dtype code {dtype_code}")
        dims_raw = fh.read(4 * ndim)
        if len(dims_raw) < 4 * ndim:
            raise TruncatedPayloadError(f"{path}: header declares {ndim} dims, file too short")
        dims = struct.unpack(f"<{ndim}I", dims_raw)
    dtype = _DTYPES[dtype_code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if size - (7 + 4 * ndim) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload is {size - (7 + 4 * ndim)} bytes, dims {dims} require {expected}"
        )
    return dtype, dims


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a tensor written by write_tensor; round-trips bit-exactly."""
    data = Path(path).read_bytes()
    if len(data) < 7:
        raise TruncatedPayloadError(f"{path}: file shorter than fixed header")
    if data[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:4]!r}")
    version, dtype_code, ndim = struct.unpack("<BBB", data[4:7])
    if version != VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    if dtype_code not in _DTYPES:
        raise BadDtypeError(f"{path}: unknown dtype code {dtype_code}")
    dims_end = 7 + 4 * ndim
    if len(data) < dims_end:
        raise TruncatedPayloadError(f"{path}: header declares {ndim} dims, file too short")
    dims = struct.unpack(f"<{ndim}I", data[7:dims_end])
    dtype = _DTYPES[dtype_code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    payload = data[dims_end:]
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(payload)} bytes, dims {dims} require {expected}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
