import numpy as np
import pytest

from gmic3d.container import FormatError, load_arrays, save_arrays


def test_round_trip_mixed_dtypes(tmp_path):
    path = tmp_path / "mixed.bin"
    arrays = {
        "a": np.arange(24, dtype=np.float32).reshape(2, 3, 4),
        "b": np.array([1, -2, 3], dtype=np.int64),
        "c": np.random.default_rng(0).random((5, 5)),
        "d": np.array([1, 0, 1], dtype=np.uint8),
    }
    meta = {"note": "hello", "n": 4}
    save_arrays(path, arrays, meta)
    meta2, arrays2 = load_arrays(path)
    assert meta2 == meta
    assert set(arrays2) == set(arrays)
    for name in arrays:
        assert arrays2[name].dtype == arrays[name].dtype
        np.testing.assert_array_equal(arrays2[name], arrays[name])


def test_save_load_save_bit_stable(tmp_path):
    p1, p2 = tmp_path / "one.bin", tmp_path / "two.bin"
    arrays = {"x": np.random.default_rng(1).random((7, 3)).astype(np.float32)}
    save_arrays(p1, arrays, {"k": [1, 2]})
    meta, loaded = load_arrays(p1)
    save_arrays(p2, loaded, meta)
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTAFILE" + b"\x00" * 64)
    with pytest.raises(FormatError, match="magic"):
        load_arrays(path)


def test_truncated_payload_names_record(tmp_path):
    path = tmp_path / "trunc.bin"
    save_arrays(
        path,
        {"first": np.zeros(4, dtype=np.float32), "last": np.ones(64, dtype=np.float32)},
    )
    data = path.read_bytes()
    path.write_bytes(data[:-16])
    with pytest.raises(FormatError, match="last"):
        load_arrays(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "hdr.bin"
    save_arrays(path, {"x": np.zeros(3)})
    data = path.read_bytes()
    path.write_bytes(data[:20])
    with pytest.raises(FormatError):
        load_arrays(path)


def test_empty_container_round_trip(tmp_path):
    path = tmp_path / "empty.bin"
    save_arrays(path, {}, {"only": "meta"})
    meta, arrays = load_arrays(path)
    assert meta == {"only": "meta"}
    assert arrays == {}
