import numpy as np
import pytest

from periodic_rips import WeightFormatError
from periodic_rips.tensorio import CONTAINER_MAGIC, read_container, write_container


def test_roundtrip(tmp_path):
    tensors = {
        "a.w": np.arange(6, dtype=np.float64).reshape(2, 3),
        "b": np.array([1.5], dtype=np.float32),
        "idx": np.array([[0, 1], [1, 2]], dtype=np.int64),
    }
    path = tmp_path / "t.hsmpt"
    write_container(path, tensors, {"kind": "test", "n": 2})
    back, meta = read_container(path)
    assert meta == {"kind": "test", "n": 2}
    assert set(back) == set(tensors)
    for name in tensors:
        assert back[name].dtype == tensors[name].dtype
        assert np.array_equal(back[name], tensors[name])


def test_magic_bytes(tmp_path):
    path = tmp_path / "t.hsmpt"
    write_container(path, {"x": np.zeros(2)}, {})
    assert path.read_bytes().startswith(CONTAINER_MAGIC)


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTRIGHT" + b"\x00" * 64)
    with pytest.raises(WeightFormatError, match="magic"):
        read_container(path)


def test_rejects_truncated_blob(tmp_path):
    path = tmp_path / "t.hsmpt"
    write_container(path, {"x": np.zeros(64)}, {})
    raw = path.read_bytes()
    path.write_bytes(raw[:-16])
    with pytest.raises(WeightFormatError, match="overruns"):
        read_container(path)


def test_rejects_unsupported_dtype(tmp_path):
    with pytest.raises(WeightFormatError, match="unsupported dtype"):
        write_container(tmp_path / "t.hsmpt", {"x": np.zeros(3, dtype=np.complex128)}, {})


def test_deterministic_bytes(tmp_path):
    tensors = {"b": np.ones(3), "a": np.zeros((2, 2))}
    p1, p2 = tmp_path / "one", tmp_path / "two"
    write_container(p1, tensors, {"k": 1})
    write_container(p2, tensors, {"k": 1})
    assert p1.read_bytes() == p2.read_bytes()
