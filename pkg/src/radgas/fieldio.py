"""Self-describing binary field dumps.

Layout::

    magic   b"RADGASF\\0"                      8 bytes
    version uint32 little-endian              4 bytes
    hlen    uint32 little-endian              4 bytes
    header  UTF-8 JSON, hlen bytes            {"n", "N", "L", "dtype", "endianness", "version", ...}
    payload raw float64 samples, C order

The payload is written little-endian regardless of platform, so the round
trip is bit-exact everywhere.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FieldFormatError
from .grid import Grid

MAGIC = b"RADGASF\0"
VERSION = 1
_PREFIX = struct.Struct("<8sII")


def dump_field(path, grid: Grid, f, meta: dict | None = None) -> None:
    f = np.asarray(f)
    if f.shape not in (grid.shape, (grid.n,) + grid.shape):
        raise FieldFormatError(f"field shape {f.shape} does not match grid {grid.shape}")
    header = {
        "version": VERSION,
        "n": grid.n,
        "N": grid.N,
        "L": grid.L,
        "components": 1 if f.shape == grid.shape else grid.n,
        "dtype": "<f8",
        "endianness": "little",
    }
    if meta:
        header["meta"] = meta
    blob = json.dumps(header, sort_keys=True).encode()
    payload = np.ascontiguousarray(f, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(blob)))
        fh.write(blob)
        fh.write(payload)


def read_header(path) -> dict:
    """Header metadata without touching the payload."""
    with open(path, "rb") as fh:
        header, _ = _read_header(fh, path)
    return header


def _read_header(fh, path):
    prefix = fh.read(_PREFIX.size)
    if len(prefix) != _PREFIX.size:
        raise FieldFormatError(f"{path}: truncated header")
    magic, version, hlen = _PREFIX.unpack(prefix)
    if magic != MAGIC:
        raise FieldFormatError(f"{path}: not a radgas field dump")
    if version != VERSION:
        raise FieldFormatError(f"{path}: format version {version}, expected {VERSION}")
    try:
        header = json.loads(fh.read(hlen).decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FieldFormatError(f"{path}: corrupt header ({exc})") from None
    if header.get("dtype") != "<f8" or header.get("version") != VERSION:
        raise FieldFormatError(f"{path}: unsupported dtype or version in header")
    return header, _PREFIX.size + hlen


def load_field(path, grid: Grid | None = None):
    """Load a dump; with ``grid`` given, its shape and box must match.

    Returns ``(grid, field)``.  Nothing is returned on mismatch.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        header, _ = _read_header(fh, path)
        stored = Grid(header["n"], header["N"], header["L"])
        if grid is not None and (grid.n, grid.N, grid.L) != (stored.n, stored.N, stored.L):
            raise FieldFormatError(
                f"{path}: stored grid (n={stored.n}, N={stored.N}, L={stored.L}) "
                f"does not match (n={grid.n}, N={grid.N}, L={grid.L})"
            )
        comps = int(header.get("components", 1))
        shape = stored.shape if comps == 1 else (comps,) + stored.shape
        count = int(np.prod(shape))
        data = fh.read()
    if len(data) != 8 * count:
        raise FieldFormatError(f"{path}: payload has {len(data)} bytes, expected {8 * count}")
    f = np.frombuffer(data, dtype="<f8").reshape(shape).astype(float)
    return stored, f
