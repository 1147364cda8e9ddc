"""Minimal binary tensor container used for every raster exchanged on disk.

File layout, fully little-endian and canonical (two writes of the same
tensor are byte-identical):

    magic    4 bytes   ASCII "IMTF"
    version  uint16    currently 1
    dtype    uint8     1 = 32-bit IEEE-754 float, 2 = 8-bit unsigned
    ndim     uint8
    dims     ndim x uint32
    payload  row-major, last dimension fastest
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"IMTF"
VERSION = 1

# dtype code -> little-endian numpy dtype
DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("u1")}
_CODE_FOR_KIND = {("f", 4): 1, ("u", 1): 2}

_HEAD = struct.Struct("<4sHBB")


class TensorFileError(Exception):
    """Base error for malformed or unsupported tensor files."""


class BadMagicError(TensorFileError):
    pass


class UnsupportedVersionError(TensorFileError):
    pass


class UnsupportedDtypeError(TensorFileError):
    pass


class TruncatedFileError(TensorFileError):
    pass


class TrailingDataError(TensorFileError):
    pass


def dtype_code(dtype) -> int:
    """Map a numpy dtype to its container code, or raise ValueError."""
    dt = np.dtype(dtype)
    code = _CODE_FOR_KIND.get((dt.kind, dt.itemsize))
    if code is None:
        raise ValueError(
            f"unsupported dtype {dt}: only float32 (code 1) and uint8 (code 2) tensors exist"
        )
    return code


def write_tensor(path, values, dims=None) -> None:
    """Write `values` to `path` in the container format.

    `values` must be a float32 or uint8 array (cast explicitly at the call
    site; nothing is converted silently). When `dims` is given, `values` may
    be flat and is laid out row-major over `dims`; the element count must
    match exactly.
    """
    arr = np.asarray(values)
    code = dtype_code(arr.dtype)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if len(dims) == 0:
            raise ValueError("dims must be nonempty")
        expected = int(np.prod(dims, dtype=np.int64))
        if arr.size != expected:
            raise ValueError(
                f"payload has {arr.size} elements but dims {dims} require {expected}"
            )
        arr = arr.reshape(dims)
    if arr.ndim == 0:
        raise ValueError("dims must be nonempty")
    if any(d < 1 for d in arr.shape):
        raise ValueError(f"dims must all be >= 1, got {arr.shape}")
    if arr.ndim > 255:
        raise ValueError("rank exceeds container limit of 255")
    header = _HEAD.pack(MAGIC, VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype=DTYPE_CODES[code]).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tensor(path) -> np.ndarray:
    """Read a container file back into a writable numpy array.

    Raises BadMagicError, UnsupportedVersionError, UnsupportedDtypeError,
    TruncatedFileError or TrailingDataError so callers can tell the failure
    modes apart.
    """
    blob = Path(path).read_bytes()
    if len(blob) < _HEAD.size:
        raise TruncatedFileError(f"{path}: file shorter than fixed header")
    magic, version, code, ndim = _HEAD.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}")
    if code not in DTYPE_CODES:
        raise UnsupportedDtypeError(f"{path}: unknown dtype code {code}")
    if ndim == 0:
        raise TensorFileError(f"{path}: zero-dimensional tensors are not allowed")
    dims_end = _HEAD.size + 4 * ndim
    if len(blob) < dims_end:
        raise TruncatedFileError(f"{path}: header truncated inside dims")
    dims = struct.unpack_from(f"<{ndim}I", blob, _HEAD.size)
    if any(d < 1 for d in dims):
        raise TensorFileError(f"{path}: dims must all be >= 1, got {dims}")
    dtype = DTYPE_CODES[code]
    count = int(np.prod(dims, dtype=np.int64))
    expected = dims_end + count * dtype.itemsize
    if len(blob) < expected:
        raise TruncatedFileError(
            f"{path}: payload holds {len(blob) - dims_end} bytes, "
            f"dims {dims} require {count * dtype.itemsize}"
        )
    if len(blob) > expected:
        raise TrailingDataError(f"{path}: {len(blob) - expected} trailing bytes")
    flat = np.frombuffer(blob, dtype=dtype, count=count, offset=dims_end)
    return flat.reshape(dims).copy()
