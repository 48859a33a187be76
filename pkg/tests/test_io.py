import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manifold_infer.errors import ShapeMismatch
from manifold_infer.io import (
    MAGIC,
    dumps_json,
    format_float,
    read_dataset,
    read_dataset_binary,
    read_dataset_csv,
    read_matrix_csv,
    read_point,
    read_rows,
    rows_to_csv,
    write_dataset_binary,
    write_dataset_csv,
    write_matrix_csv,
    write_point,
    write_rows,
)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


def test_format_float_is_shortest():
    assert format_float(0.1) == "0.1"
    assert format_float(1.0) == "1.0"
    assert format_float(np.float64(2.5e-300)) == "2.5e-300"
    assert format_float(float("nan")) == "nan"
    assert format_float(float("-inf")) == "-inf"


@pytest.mark.parametrize("shape", [(3,), (4, 2), (3, 3, 3)])
def test_dataset_round_trip_csv_and_binary(tmp_path, rng, shape):
    X = rng.standard_normal((7,) + shape)
    write_dataset_csv(tmp_path / "d.csv", X)
    write_dataset_binary(tmp_path / "d.bin", X)
    np.testing.assert_array_equal(read_dataset_csv(tmp_path / "d.csv", shape), X)
    np.testing.assert_array_equal(read_dataset_binary(tmp_path / "d.bin", shape), X)
    np.testing.assert_array_equal(read_dataset(tmp_path / "d.bin", shape), X)
    np.testing.assert_array_equal(read_dataset(tmp_path / "d.csv", shape), X)


def test_csv_rows_are_column_major(tmp_path):
    X = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    write_dataset_csv(tmp_path / "d.csv", X)
    assert (tmp_path / "d.csv").read_text().strip() == "1.0,3.0,2.0,4.0"


def test_binary_header_layout(tmp_path):
    X = np.arange(6.0).reshape(2, 3)
    write_dataset_binary(tmp_path / "d.bin", X)
    raw = (tmp_path / "d.bin").read_bytes()
    assert raw[:4] == MAGIC
    assert struct.unpack_from("<II", raw, 4) == (1, 2)
    assert struct.unpack_from("<2Q", raw, 12) == (2, 3)
    assert len(raw) == 28 + 8 * 6


def test_binary_errors(tmp_path):
    X = np.ones((3, 3))
    path = tmp_path / "d.bin"
    write_dataset_binary(path, X)
    raw = path.read_bytes()
    (tmp_path / "magic.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="magic"):
        read_dataset_binary(tmp_path / "magic.bin")
    (tmp_path / "ver.bin").write_bytes(raw[:4] + struct.pack("<I", 9) + raw[8:])
    with pytest.raises(ValueError, match="version"):
        read_dataset_binary(tmp_path / "ver.bin")
    (tmp_path / "trunc.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="truncated"):
        read_dataset_binary(tmp_path / "trunc.bin")
    with pytest.raises(ShapeMismatch):
        read_dataset_binary(path, (4,))


def test_csv_shape_errors(tmp_path):
    (tmp_path / "ragged.csv").write_text("1,2,3\n1,2\n")
    with pytest.raises(ShapeMismatch):
        read_dataset_csv(tmp_path / "ragged.csv", (3,))
    (tmp_path / "wide.csv").write_text("1,2,3,4\n")
    with pytest.raises(ShapeMismatch):
        read_dataset_csv(tmp_path / "wide.csv", (3,))
    (tmp_path / "empty.csv").write_text("")
    assert read_dataset_csv(tmp_path / "empty.csv", (3,)).shape == (0, 3)


def test_point_and_matrix_round_trip(tmp_path, rng):
    x = rng.standard_normal((4, 2))
    write_point(tmp_path / "x.csv", x)
    np.testing.assert_array_equal(read_point(tmp_path / "x.csv", (4, 2)), x)
    M = rng.standard_normal((3, 3))
    write_matrix_csv(tmp_path / "m.csv", M)
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "m.csv"), M)
    write_dataset_csv(tmp_path / "two.csv", rng.standard_normal((2, 3)))
    with pytest.raises(ShapeMismatch):
        read_point(tmp_path / "two.csv", (3,))


def test_rows_csv(tmp_path):
    rows = [{"n": 40, "ok": True, "v": 0.1}, {"n": 80, "ok": False, "v": 1 / 3}]
    text = rows_to_csv(rows, ["n", "ok", "v"])
    assert text == "n,ok,v\n40,true,0.1\n80,false,0.3333333333333333\n"
    write_rows(tmp_path / "r.csv", rows, ["n", "ok", "v"])
    assert read_rows(tmp_path / "r.csv")[1] == {"n": "80", "ok": "false", "v": "0.3333333333333333"}


def test_json_is_deterministic():
    a = {"b": np.float64(0.5), "a": [np.int64(1), np.array([1.0, 2.0])], "c": float("nan"), "d": np.bool_(True)}
    b = dict(reversed(list(a.items())))
    assert dumps_json(a) == dumps_json(b)
    assert '"c": "nan"' in dumps_json(a)
    assert dumps_json(a).index('"a"') < dumps_json(a).index('"b"')
