import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hiref.errors import DatasetError
from hiref.io import MAGIC, read_points, write_points


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6, allow_subnormal=False)),
       st.sampled_from(["p.csv", "p.otpt", "p.bin"]))
def test_round_trip_exact(tmp_path, pts, name):
    path = tmp_path / name
    write_points(path, pts)
    assert np.array_equal(read_points(path).points, pts)


def test_binary_layout(tmp_path):
    path = tmp_path / "p.otpt"
    write_points(path, [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert struct.unpack_from("<IQQ", raw, 4) == (1, 3, 2)
    assert np.frombuffer(raw[24:], "<f8").tolist() == [1, 2, 3, 4, 5, 6]


def test_csv_header_optional(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_text("x,y\n1,2\n3,4\n")
    b.write_text("1,2\n3,4\n\n")
    assert np.array_equal(read_points(a).points, read_points(b).points)


def test_csv_written_header(tmp_path):
    path = tmp_path / "p.csv"
    write_points(path, [[0.5, 1.5]])
    assert path.read_bytes() == b"x0,x1\n0.5,1.5\n"


@pytest.mark.parametrize("body", ["", "x,y\n", "1,2\n3\n", "1,2\nfoo,3\n", "1,nan\n"])
def test_bad_csv(tmp_path, body):
    path = tmp_path / "p.csv"
    path.write_text(body)
    with pytest.raises(DatasetError):
        read_points(path)


@pytest.mark.parametrize("mutate", [
    lambda raw: raw[:10],
    lambda raw: b"XXXX" + raw[4:],
    lambda raw: raw[:4] + struct.pack("<I", 2) + raw[8:],
    lambda raw: raw[:-8],
])
def test_bad_binary(tmp_path, mutate):
    path = tmp_path / "p.bin"
    write_points(path, [[1.0, 2.0]])
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(DatasetError):
        read_points(path)
