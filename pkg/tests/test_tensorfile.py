import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floodkit import tensorfile
from floodkit.tensorfile import (
    BadMagicError,
    TrailingDataError,
    TruncatedFileError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
    read_tensor,
    write_tensor,
)

GOLDEN_HEADER = bytes.fromhex("494D5446" "0100" "01" "02" "02000000" "03000000")


def test_header_bytes_are_bit_exact(tmp_path):
    path = tmp_path / "t.imtf"
    write_tensor(path, np.arange(6, dtype=np.float32).reshape(2, 3))
    blob = path.read_bytes()
    assert blob[:16] == GOLDEN_HEADER
    assert len(blob) == 16 + 24  # 6 float32 payload values


def test_round_trip_identity(tmp_path, rng):
    path = tmp_path / "t.imtf"
    values = rng.normal(size=(3, 4, 5)).astype(np.float32)
    write_tensor(path, values)
    back = read_tensor(path)
    assert back.dtype == np.float32
    assert back.shape == (3, 4, 5)
    np.testing.assert_array_equal(back, values)


def test_writes_are_canonical(tmp_path, rng):
    values = rng.normal(size=(7, 2)).astype(np.float32)
    a, b = tmp_path / "a.imtf", tmp_path / "b.imtf"
    write_tensor(a, values)
    write_tensor(b, values)
    assert a.read_bytes() == b.read_bytes()


def test_flat_payload_with_dims(tmp_path):
    path = tmp_path / "t.imtf"
    write_tensor(path, np.arange(6, dtype=np.float32), dims=(2, 3))
    assert read_tensor(path).shape == (2, 3)


def test_dims_payload_mismatch_is_rejected(tmp_path):
    with pytest.raises(ValueError, match="5 elements"):
        write_tensor(tmp_path / "t.imtf", np.zeros(5, dtype=np.float32), dims=(2, 3))


def test_unsupported_write_dtype(tmp_path):
    with pytest.raises(ValueError, match="unsupported dtype"):
        write_tensor(tmp_path / "t.imtf", np.zeros((2, 2), dtype=np.int32))


def test_uint8_round_trip(tmp_path):
    path = tmp_path / "t.imtf"
    labels = np.array([[0, 1], [2, 3]], dtype=np.uint8)
    write_tensor(path, labels)
    back = read_tensor(path)
    assert back.dtype == np.uint8
    np.testing.assert_array_equal(back, labels)


def test_bad_magic(tmp_path):
    path = tmp_path / "t.imtf"
    write_tensor(path, np.zeros((2, 3), dtype=np.float32))
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(BadMagicError):
        read_tensor(path)


def test_unsupported_version(tmp_path):
    path = tmp_path / "t.imtf"
    write_tensor(path, np.zeros((2, 3), dtype=np.float32))
    blob = bytearray(path.read_bytes())
    blob[4] = 9
    path.write_bytes(bytes(blob))
    with pytest.raises(UnsupportedVersionError):
        read_tensor(path)


def test_unsupported_dtype_code(tmp_path):
    path = tmp_path / "t.imtf"
    write_tensor(path, np.zeros((2, 3), dtype=np.float32))
    blob = bytearray(path.read_bytes())
    blob[6] = 7
    path.write_bytes(bytes(blob))
    with pytest.raises(UnsupportedDtypeError):
        read_tensor(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.imtf"
    write_tensor(path, np.zeros((2, 3), dtype=np.float32))
    blob = path.read_bytes()
    path.write_bytes(blob[: 16 + 20])  # 20 of the 24 payload bytes
    with pytest.raises(TruncatedFileError):
        read_tensor(path)


def test_trailing_garbage_rejected(tmp_path):
    path = tmp_path / "t.imtf"
    write_tensor(path, np.zeros((2, 3), dtype=np.float32))
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(TrailingDataError):
        read_tensor(path)


def test_empty_dims_rejected(tmp_path):
    with pytest.raises(ValueError, match="nonempty"):
        write_tensor(tmp_path / "t.imtf", np.float32(3.5))


@settings(max_examples=60, deadline=None)
@given(
    dims=st.lists(st.integers(min_value=1, max_value=6), min_size=1, max_size=4),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    code=st.sampled_from([1, 2]),
)
def test_round_trip_property(tmp_path_factory, dims, seed, code):
    gen = np.random.default_rng(seed)
    if code == 1:
        values = gen.normal(size=dims).astype(np.float32)
    else:
        values = gen.integers(0, 256, size=dims).astype(np.uint8)
    path = tmp_path_factory.mktemp("imtf") / "t.imtf"
    write_tensor(path, values)
    back = read_tensor(path)
    assert back.dtype == values.dtype and back.shape == tuple(dims)
    np.testing.assert_array_equal(back, values)


def test_dtype_code_mapping():
    assert tensorfile.dtype_code(np.float32) == 1
    assert tensorfile.dtype_code(np.uint8) == 2
    with pytest.raises(ValueError):
        tensorfile.dtype_code(np.float64)
