import struct

import numpy as np
import pytest

from weakflow.fieldio import read_field, read_vector, write_field, write_vector
from weakflow.grid import GridSpec, ScalarField, VectorField


def test_roundtrip_bit_exact(tmp_path, rng):
    g = GridSpec(3.5, 8)
    f = ScalarField(g, rng.standard_normal(g.shape))
    back = read_field(write_field(tmp_path / "f.wkfl", f))
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_header_and_ordering(tmp_path):
    g = GridSpec(2.0, 8)
    vals = np.zeros(g.shape)
    vals[1, 0, 0] = 1.0  # x1 index 1 is the second sample on disk
    vals[0, 1, 0] = 2.0  # x2 index 1 is sample N
    raw = write_field(tmp_path / "f.wkfl", ScalarField(g, vals)).read_bytes()
    magic, version, n, L = struct.unpack_from("<4sIId", raw)
    assert (magic, version, n, L) == (b"WKFL", 1, 8, 2.0)
    body = np.frombuffer(raw, dtype="<f8", offset=20)
    assert body.size == 8 ** 3
    assert body[1] == 1.0 and body[8] == 2.0


def test_vector_files(tmp_path, rng):
    g = GridSpec(1.0, 8)
    v = VectorField(g, rng.standard_normal((3,) + g.shape))
    paths = write_vector(tmp_path / "u", v)
    assert [p.name for p in paths] == ["u_1.wkfl", "u_2.wkfl", "u_3.wkfl"]
    assert np.array_equal(read_vector(tmp_path / "u").components, v.components)


@pytest.mark.parametrize(
    "mutate, msg",
    [
        (lambda b: b"XXXX" + b[4:], "magic"),
        (lambda b: b[:4] + struct.pack("<I", 9) + b[8:], "version"),
        (lambda b: b[:-8], "bytes"),
        (lambda b: b[:10], "truncated"),
    ],
)
def test_corrupt_files(tmp_path, mutate, msg):
    p = write_field(tmp_path / "f.wkfl", ScalarField.zeros(GridSpec(1.0, 8)))
    p.write_bytes(mutate(p.read_bytes()))
    with pytest.raises(ValueError, match=msg):
        read_field(p)
