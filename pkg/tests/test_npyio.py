import io
import os
import struct

import numpy as np
import pytest

from rankfeat import npyio
from rankfeat.errors import InvalidInputError, NpyFormatError

DATA = os.path.join(os.path.dirname(__file__), "data")


def hand_built(header, payload, version=b"\x01\x00"):
    return b"\x93NUMPY" + version + struct.pack("<H", len(header)) + header.encode("ascii") + payload


def golden_1x1():
    # 10-byte preamble + 118-byte header = 128, a multiple of 64
    text = "{'descr': '<f8', 'fortran_order': False, 'shape': (1, 1), }"
    text = text + " " * (118 - len(text) - 1) + "\n"
    return hand_built(text, b"\x00" * 8)


def test_golden_file():
    with open(os.path.join(DATA, "zero_1x1.npy"), "rb") as fh:
        raw = fh.read()
    assert raw == golden_1x1()
    assert npyio.npy_bytes(np.zeros((1, 1))) == raw
    a = npyio.read_npy(os.path.join(DATA, "zero_1x1.npy"))
    assert a.shape == (1, 1) and a[0, 0] == 0.0


def test_hand_built_16_aligned():
    text = "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }"
    text = text + " " * (-(10 + len(text) + 1) % 16) + "\n"
    assert (10 + len(text)) % 16 == 0
    raw = hand_built(text, struct.pack("<4d", 1, 2, 3, 4))
    assert np.array_equal(npyio.parse_npy(raw), [[1, 2], [3, 4]])


def test_f4_promotion():
    text = "{'descr': '<f4', 'fortran_order': False, 'shape': (3,), }\n"
    out = npyio.parse_npy(hand_built(text, struct.pack("<3f", 0.5, -1.25, 3.0)))
    assert out.dtype == np.float64 and np.array_equal(out, [0.5, -1.25, 3.0])


def test_round_trip_is_bit_identical(tmp_path):
    rng = np.random.default_rng(0)
    special = np.array([[-0.0, 5e-324, 1.7976931348623157e308], [np.nextafter(1, 2), -1e-310, 0.1]])
    for a in (rng.standard_normal((3, 4)), rng.standard_normal((5, 2, 7)), special, np.zeros((0, 3, 4)), rng.standard_normal(9)):
        p = tmp_path / "a.npy"
        npyio.write_npy(a, p)
        b = npyio.read_npy(p)
        assert b.shape == a.shape and a.tobytes() == b.tobytes()
        raw = p.read_bytes()
        hlen = struct.unpack("<H", raw[8:10])[0]
        assert (10 + hlen) % 64 == 0 and raw[10 + hlen - 1:10 + hlen] == b"\n"


def test_numpy_interop():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((3, 2, 2))
    assert b"'shape': (3, 2, 2)" in npyio.npy_bytes(a)
    assert np.array_equal(np.load(io.BytesIO(npyio.npy_bytes(a))), a)
    buf = io.BytesIO()
    np.save(buf, a.astype(np.float32))
    assert np.array_equal(npyio.parse_npy(buf.getvalue()), a.astype(np.float32))


@pytest.mark.parametrize("raw,offset", [
    (b"", 0),
    (b"\x93NUMPX\x01\x00\x10\x00" + b" " * 16, 0),
    (b"\x93NUMPY\x02\x00\x10\x00" + b" " * 16, 6),
    (b"\x93NUMPY\x01\x00\xff\x00{}", 12),
])
def test_preamble_errors(raw, offset):
    with pytest.raises(NpyFormatError) as exc:
        npyio.parse_npy(raw)
    assert exc.value.offset == offset
    assert f"at byte {offset}" in str(exc.value)


@pytest.mark.parametrize("header", [
    "{'descr': '>f8', 'fortran_order': False, 'shape': (1,), }\n",
    "{'descr': '<i8', 'fortran_order': False, 'shape': (1,), }\n",
    "{'descr': '<f8', 'fortran_order': True, 'shape': (1,), }\n",
    "{'descr': '<f8', 'fortran_order': False, 'shape': (1, 1, 1, 1), }\n",
    "{'descr': '<f8', 'fortran_order': False, 'shape': (-1,), }\n",
    "{'descr': '<f8', 'fortran_order': False, 'shape': (True,), }\n",
    "{'descr': '<f8', 'fortran_order': False, 'shape': [1], }\n",
    "{'descr': '<f8', 'fortran_order': False, }\n",
    "{'descr': '<f8', 'fortran_order': False, 'shape': (1,), 'x': 1}\n",
    "['descr']\n",
    "{'descr': '<f8', 'fortran_order': False, 'shape': (1,), \n",
    "{'descr': '<f8', 'fortran_order': False, 'shape': (1,), }",
    "__import__('os')\n",
])
def test_header_errors(header):
    with pytest.raises(NpyFormatError):
        npyio.parse_npy(hand_built(header, b"\x00" * 8))


def test_payload_errors():
    good = npyio.npy_bytes(np.ones((2, 2)))
    with pytest.raises(NpyFormatError, match="truncated"):
        npyio.parse_npy(good[:-1])
    with pytest.raises(NpyFormatError, match="trailing"):
        npyio.parse_npy(good + b"\x00")
    with pytest.raises(NpyFormatError, match="ASCII"):
        npyio.parse_npy(good[:20] + b"\xff" + good[21:])
    nan = npyio.npy_bytes(np.array([1.0, 0.0]))[:-8] + struct.pack("<d", float("nan"))
    with pytest.raises(InvalidInputError):
        npyio.parse_npy(nan)


def test_write_errors(tmp_path):
    with pytest.raises(InvalidInputError):
        npyio.npy_bytes(np.zeros((1, 1, 1, 1)))
    with pytest.raises(OSError):
        npyio.write_npy(np.zeros(2), tmp_path / "missing" / "a.npy")


def test_read_reports_path(tmp_path):
    p = tmp_path / "bad.npy"
    p.write_bytes(b"junk")
    with pytest.raises(NpyFormatError, match="bad.npy"):
        npyio.read_npy(p)
