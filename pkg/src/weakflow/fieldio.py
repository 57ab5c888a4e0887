"""Flat binary field dumps.

Layout: b"WKFL", uint32 version, uint32 N, float64 L, then N^3 float64
samples, all little-endian, with x1 varying fastest. A vector field is
written as one file per component.
"""
import struct
from pathlib import Path

import numpy as np

from .grid import GridSpec, ScalarField, VectorField

MAGIC = b"WKFL"
VERSION = 1
_HEADER = struct.Struct("<4sIId")


def write_field(path, field: ScalarField) -> Path:
    path = Path(path)
    g = field.grid
    head = _HEADER.pack(MAGIC, VERSION, g.points_per_axis, g.box_length)
    # values are indexed (i1, i2, i3); Fortran order puts i1 fastest
    body = np.asarray(field.values, dtype="<f8").ravel(order="F").tobytes()
    path.write_bytes(head + body)
    return path


def read_field(path) -> ScalarField:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, L = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    grid = GridSpec(L, n)
    expect = _HEADER.size + 8 * n ** 3
    if len(raw) != expect:
        raise ValueError(f"{path}: expected {expect} bytes, found {len(raw)}")
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape((n, n, n), order="F")
    return ScalarField(grid, vals.astype(np.float64))


def write_vector(path_stem, field: VectorField):
    stem = Path(path_stem)
    out = []
    for i in range(3):
        p = stem.with_name(f"{stem.name}_{i + 1}.wkfl")
        out.append(write_field(p, field.component(i)))
    return out


def read_vector(path_stem) -> VectorField:
    stem = Path(path_stem)
    comps = [read_field(stem.with_name(f"{stem.name}_{i + 1}.wkfl")) for i in range(3)]
    return VectorField.from_components(*comps)
