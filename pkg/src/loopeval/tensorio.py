"""LTEN tensor files: the toolkit's on-disk array format.

Layout (little-endian throughout):

    magic   4 bytes  b"LTEN"
    version u16      1
    dtype   u8       0 = float32 (the only defined code)
    ndim    u8
    dims    u32 x ndim
    payload float32 x prod(dims), row-major

The payload length must equal 4 * prod(dims) exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"LTEN"
VERSION = 1
DTYPE_FLOAT32 = 0


class TensorFormatError(Exception):
    """Raised for malformed or unsupported LTEN files."""


def write_lten(path, array) -> None:
    """Write `array` as a float32 LTEN file (values are cast to float32)."""
    a = np.ascontiguousarray(array, dtype="<f4")
    if a.ndim == 0:
        a = a.reshape(1)
    header = MAGIC + struct.pack("<HBB", VERSION, DTYPE_FLOAT32, a.ndim)
    header += struct.pack("<%dI" % a.ndim, *a.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(a.tobytes())


def read_lten(path) -> np.ndarray:
    """Read an LTEN file into a float32 array."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 8 or data[:4] != MAGIC:
        raise TensorFormatError(f"{path}: not an LTEN file (bad magic)")
    version, dtype, ndim = struct.unpack_from("<HBB", data, 4)
    if version != VERSION:
        raise TensorFormatError(f"{path}: unsupported LTEN version {version}")
    if dtype != DTYPE_FLOAT32:
        raise TensorFormatError(f"{path}: unsupported dtype code {dtype}")
    offset = 8
    if len(data) < offset + 4 * ndim:
        raise TensorFormatError(f"{path}: truncated header")
    dims = struct.unpack_from("<%dI" % ndim, data, offset)
    offset += 4 * ndim
    count = 1
    for d in dims:
        count *= d
    expected = 4 * count
    if len(data) - offset != expected:
        raise TensorFormatError(
            f"{path}: payload is {len(data) - offset} bytes, expected {expected}"
        )
    array = np.frombuffer(data, dtype="<f4", offset=offset, count=count)
    if not np.all(np.isfinite(array)):
        raise TensorFormatError(f"{path}: payload contains non-finite values")
    return array.reshape(dims).copy()
