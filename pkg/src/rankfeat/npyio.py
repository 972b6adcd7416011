"""Reader and writer for the float subset of the NPY v1.0 format.

Layout: the magic ``\\x93NUMPY``, version bytes ``1 0``, a little-endian
uint16 header length, an ASCII dict literal
``{'descr': '<f8', 'fortran_order': False, 'shape': (r, c), }`` padded with
spaces and a final newline, then the raw C-order payload. Reading accepts
``<f8`` and ``<f4`` (promoted to float64) with 1 to 3 dimensions. Writing
always emits ``<f8`` with the header padded so the payload starts on a
64-byte boundary.
"""
import ast
import math
import struct
import warnings

import numpy as np

from .errors import InvalidInputError, NpyFormatError

MAGIC = b"\x93NUMPY"
ALIGN = 64
_PREAMBLE = len(MAGIC) + 4
_DTYPES = {"<f8": np.dtype("<f8"), "<f4": np.dtype("<f4")}
_KEYS = {"descr", "fortran_order", "shape"}


def _parse_header(text, offset):
    try:
        # malformed escapes in hostile headers would otherwise emit warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            header = ast.literal_eval(text)
    except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError) as exc:
        raise NpyFormatError(f"header is not a valid literal ({type(exc).__name__})", offset) from None
    if not isinstance(header, dict):
        raise NpyFormatError("header is not a dict", offset)
    if set(header) != _KEYS:
        raise NpyFormatError(f"header keys must be {sorted(_KEYS)}, got {sorted(map(str, header))}", offset)
    descr = header["descr"]
    if descr not in _DTYPES:
        raise NpyFormatError(f"unsupported descr {descr!r}; only '<f8' and '<f4'", offset)
    if header["fortran_order"] is not False:
        raise NpyFormatError("fortran_order arrays are not supported", offset)
    shape = header["shape"]
    if not isinstance(shape, tuple) or not 1 <= len(shape) <= 3:
        raise NpyFormatError(f"shape must be a tuple of 1 to 3 dimensions, got {shape!r}", offset)
    for dim in shape:
        # bool is an int subclass; reject it explicitly
        if type(dim) is not int or dim < 0:
            raise NpyFormatError(f"invalid dimension {dim!r} in shape", offset)
    return _DTYPES[descr], shape


def parse_npy(data):
    """Decode NPY bytes into a float64 array."""
    data = bytes(data)
    if len(data) < _PREAMBLE:
        raise NpyFormatError("file too short for an NPY preamble", len(data))
    if data[:6] != MAGIC:
        raise NpyFormatError("bad magic string", 0)
    if data[6:8] != b"\x01\x00":
        raise NpyFormatError(f"unsupported version {data[6]}.{data[7]}; only 1.0", 6)
    (hlen,) = struct.unpack("<H", data[8:10])
    end = _PREAMBLE + hlen
    if len(data) < end:
        raise NpyFormatError(f"header truncated: declared {hlen} bytes", len(data))
    try:
        text = data[_PREAMBLE:end].decode("ascii")
    except UnicodeDecodeError as exc:
        raise NpyFormatError("header is not ASCII", _PREAMBLE + exc.start) from None
    if not text.endswith("\n"):
        raise NpyFormatError("header does not end in a newline", end - 1)
    dtype, shape = _parse_header(text, _PREAMBLE)

    count = math.prod(shape)
    need = count * dtype.itemsize
    have = len(data) - end
    if have < need:
        raise NpyFormatError(f"payload truncated: need {need} bytes, found {have}", len(data))
    if have > need:
        raise NpyFormatError(f"{have - need} trailing bytes after payload", end + need)
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=end).astype(np.float64).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("NPY payload contains non-finite values")
    return arr


def read_npy(path):
    """Read a float NPY v1.0 file as a float64 array (1-D, 2-D or 3-D)."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return parse_npy(data)
    except NpyFormatError as exc:
        raise NpyFormatError(f"{path}: {exc.message}", exc.offset) from None


def npy_bytes(arr):
    """Encode an array as NPY v1.0 ``<f8`` bytes."""
    a = np.asarray(arr, dtype=np.float64)
    if not 1 <= a.ndim <= 3:
        raise InvalidInputError(f"only 1-D to 3-D arrays are written, got {a.ndim}-D")
    header = "{'descr': '<f8', 'fortran_order': False, 'shape': %r, }" % (tuple(int(d) for d in a.shape),)
    pad = -(_PREAMBLE + len(header) + 1) % ALIGN
    header = header + " " * pad + "\n"
    return (MAGIC + b"\x01\x00" + struct.pack("<H", len(header)) + header.encode("ascii")
            + np.ascontiguousarray(a, dtype="<f8").tobytes())


def write_npy(arr, path):
    with open(path, "wb") as fh:
        fh.write(npy_bytes(arr))
