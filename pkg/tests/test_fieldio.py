"""Binary field file round trips and header validation."""

import json

import numpy as np
import pytest

from gfalm import FieldIOError, GridField, GridSpec, read_field, write_field
from gfalm.fieldio import field_header


def sample_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return GridField(grid, vals)


def test_round_trip_is_bit_exact_1d(tmp_path):
    g = GridSpec.make(-32.0, 64.0, 128)
    u = sample_field(g)
    path = tmp_path / "u.field"
    write_field(path, u)
    back = read_field(path)
    assert back.grid == g
    assert np.array_equal(back.values, u.values)
    # bit-exact, not merely close
    assert back.values.tobytes() == u.values.tobytes()


def test_round_trip_is_bit_exact_2d(tmp_path):
    g = GridSpec.make((-4.0, -4.0), (8.0, 8.0), (16, 12))
    u = sample_field(g, seed=3)
    path = tmp_path / "u2.field"
    write_field(path, u)
    back = read_field(path)
    assert back.grid == g
    assert back.values.shape == (16, 12)
    assert np.array_equal(back.values, u.values)


def test_rewrite_produces_identical_bytes(tmp_path):
    g = GridSpec.make(0.0, 1.0, 16)
    u = sample_field(g, seed=9)
    p1, p2 = tmp_path / "a.field", tmp_path / "b.field"
    write_field(p1, u)
    write_field(p2, u)
    assert p1.read_bytes() == p2.read_bytes()


def test_header_is_canonical_json_line():
    g = GridSpec.make((-4.0, -2.0), (8.0, 4.0), (16, 8))
    header = field_header(g)
    assert header.endswith(b"\n")
    assert b" " not in header  # compact separators
    parsed = json.loads(header.decode("utf-8"))
    assert parsed["dims"] == 2
    assert parsed["M"] == [16, 8]
    assert parsed["x0"] == [-4.0, -2.0]
    assert parsed["L"] == [8.0, 4.0]
    assert parsed["dtype"] == "c128"


def test_read_rejects_malformed_header(tmp_path):
    path = tmp_path / "bad.field"
    path.write_bytes(b"not json at all\n" + b"\x00" * 64)
    with pytest.raises(FieldIOError):
        read_field(path)


def test_read_rejects_missing_header_key(tmp_path):
    path = tmp_path / "bad.field"
    header = {"dims": 1, "M": [8], "x0": [0.0], "L": [1.0]}  # dtype missing
    path.write_bytes(json.dumps(header).encode() + b"\n" + b"\x00" * 128)
    with pytest.raises(FieldIOError, match="dtype"):
        read_field(path)


def test_read_rejects_unknown_dtype(tmp_path):
    path = tmp_path / "bad.field"
    header = {"dims": 1, "M": [8], "x0": [0.0], "L": [1.0], "dtype": "f32"}
    path.write_bytes(json.dumps(header).encode() + b"\n" + b"\x00" * 128)
    with pytest.raises(FieldIOError, match="dtype"):
        read_field(path)


def test_read_rejects_truncated_payload(tmp_path):
    g = GridSpec.make(0.0, 1.0, 16)
    u = sample_field(g)
    path = tmp_path / "t.field"
    write_field(path, u)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(FieldIOError, match="bytes"):
        read_field(path)


def test_read_rejects_trailing_garbage(tmp_path):
    g = GridSpec.make(0.0, 1.0, 16)
    path = tmp_path / "t.field"
    write_field(path, sample_field(g))
    with open(path, "ab") as fh:
        fh.write(b"extra")
    with pytest.raises(FieldIOError, match="bytes"):
        read_field(path)


def test_read_rejects_inconsistent_dims(tmp_path):
    path = tmp_path / "bad.field"
    header = {"dims": 2, "M": [8], "x0": [0.0], "L": [1.0], "dtype": "c128"}
    path.write_bytes(json.dumps(header).encode() + b"\n" + b"\x00" * 128)
    with pytest.raises(FieldIOError, match="dims"):
        read_field(path)


def test_read_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        read_field(tmp_path / "nope.field")
