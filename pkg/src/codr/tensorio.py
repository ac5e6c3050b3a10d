"""Binary tensor records.

A record is: magic "CODRTNSR", version u16 LE, dtype code u8 (1 = int8,
2 = int16, 3 = float32), rank u8, dims as u32 LE, then the row-major
little-endian payload. A file may hold several records back to back,
e.g. alternating weight and bias tensors for a multi-layer run.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import CorruptionError

TENSOR_MAGIC = b"CODRTNSR"
TENSOR_VERSION = 1

# guards reads against absurd dims from corrupted headers
_MAX_PAYLOAD_BYTES = 1 << 40

_DTYPE_CODES = {1: np.dtype("<i1"), 2: np.dtype("<i2"), 3: np.dtype("<f4")}
_CODE_FOR_KIND = {np.dtype("<i1"): 1, np.dtype("<i2"): 2, np.dtype("<f4"): 3}
_HEAD = struct.Struct("<8sHBB")


def dtype_for_bit_width(bit_width: int) -> np.dtype:
    if bit_width == 8:
        return np.dtype("<i1")
    if bit_width == 16:
        return np.dtype("<i2")
    raise ValueError(f"no integer dtype for bit width {bit_width}")


def write_tensor(f, array: np.ndarray) -> None:
    array = np.asarray(array)
    dtype = np.dtype(array.dtype).newbyteorder("<")
    if dtype not in _CODE_FOR_KIND:
        raise ValueError(f"unsupported dtype {array.dtype}; use int8, int16, or float32")
    if array.ndim > 255:
        raise ValueError("rank exceeds format limit")
    f.write(_HEAD.pack(TENSOR_MAGIC, TENSOR_VERSION, _CODE_FOR_KIND[dtype], array.ndim))
    for dim in array.shape:
        f.write(struct.pack("<I", dim))
    f.write(np.ascontiguousarray(array, dtype=dtype).tobytes())


def read_tensor(f) -> np.ndarray | None:
    """Read one record; returns None at a clean end of file."""
    head = f.read(_HEAD.size)
    if not head:
        return None
    if len(head) < _HEAD.size:
        raise CorruptionError("truncated tensor header")
    magic, version, code, rank = _HEAD.unpack(head)
    if magic != TENSOR_MAGIC:
        raise CorruptionError(f"bad tensor magic {magic!r}")
    if version != TENSOR_VERSION:
        raise CorruptionError(f"unsupported tensor version {version}")
    if code not in _DTYPE_CODES:
        raise CorruptionError(f"unknown dtype code {code}")
    dims_raw = f.read(4 * rank)
    if len(dims_raw) < 4 * rank:
        raise CorruptionError("truncated tensor dims")
    dims = struct.unpack(f"<{rank}I", dims_raw) if rank else ()
    dtype = _DTYPE_CODES[code]
    count = 1
    for d in dims:
        count *= d
    n_bytes = count * dtype.itemsize
    if n_bytes > _MAX_PAYLOAD_BYTES:
        raise CorruptionError(f"tensor payload of {n_bytes} bytes is implausible")
    payload = f.read(n_bytes)
    if len(payload) < n_bytes:
        raise CorruptionError("truncated tensor payload")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def write_tensors(path, arrays) -> None:
    with open(path, "wb") as f:
        for a in arrays:
            write_tensor(f, a)


def read_tensors(path) -> list[np.ndarray]:
    out = []
    with open(path, "rb") as f:
        while True:
            t = read_tensor(f)
            if t is None:
                return out
            out.append(t)
