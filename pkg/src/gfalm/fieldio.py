"""Binary field files: one JSON header line plus raw complex128 samples.

Layout::

    {"L": [...], "M": [...], "dims": d, "dtype": "c128", "x0": [...]}\n
    <raw little-endian float64 (re, im) pairs, axis-major (C order)>

The header is canonical JSON (sorted keys, no whitespace) so identical grids
produce identical bytes; the payload is the exact in-memory representation of
the field, so a write/read round trip is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import GridError, GridField, GridSpec

_DTYPE_TAG = "c128"
_PAYLOAD_DTYPE = np.dtype("<c16")  # little-endian complex128


class FieldIOError(GridError):
    """Malformed field file or grid/payload mismatch."""


def field_header(grid: GridSpec) -> bytes:
    header = {
        "dims": grid.dims,
        "M": list(grid.M),
        "x0": list(grid.x0),
        "L": list(grid.L),
        "dtype": _DTYPE_TAG,
    }
    return (json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n").encode(
        "utf-8"
    )


def write_field(path: str | Path, u: GridField) -> None:
    """Write ``u`` to ``path`` (header line + raw samples)."""
    payload = np.ascontiguousarray(u.values, dtype=_PAYLOAD_DTYPE)
    with open(path, "wb") as fh:
        fh.write(field_header(u.grid))
        fh.write(payload.tobytes())


def read_field(path: str | Path) -> GridField:
    """Read a field file written by :func:`write_field`."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FieldIOError(f"{path}: malformed field header: {exc}") from exc
    for key in ("dims", "M", "x0", "L", "dtype"):
        if key not in header:
            raise FieldIOError(f"{path}: field header missing key {key!r}")
    if header["dtype"] != _DTYPE_TAG:
        raise FieldIOError(f"{path}: unsupported dtype {header['dtype']!r}")
    grid = GridSpec(tuple(header["x0"]), tuple(header["L"]), tuple(header["M"]))
    if grid.dims != header["dims"]:
        raise FieldIOError(f"{path}: header dims inconsistent with axis lists")
    expected = grid.npoints * _PAYLOAD_DTYPE.itemsize
    if len(payload) != expected:
        raise FieldIOError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype=_PAYLOAD_DTYPE).astype(
        np.complex128, copy=False
    )
    return GridField(grid, values.reshape(grid.shape))
