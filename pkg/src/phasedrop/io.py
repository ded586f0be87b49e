"""Binary field files (PFLD) and 8-bit PGM images.

PFLD layout, little-endian::

    b"PFLD" | u32 version=1 | u32 n | u32 N | f64 T | u8 has_mask
    | N^n f64 values (row-major) | [N^n u8 mask bytes if has_mask]
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import Field, GridSpec

MAGIC = b"PFLD"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdB")


class PFLDError(ValueError):
    pass


def dumps_pfld(f: Field) -> bytes:
    g = f.grid
    has_mask = f.mask is not None
    parts = [
        _HEADER.pack(MAGIC, VERSION, g.n, g.N, float(g.T), 1 if has_mask else 0),
        np.ascontiguousarray(f.values, dtype="<f8").tobytes(),
    ]
    if has_mask:
        parts.append(np.ascontiguousarray(f.mask, dtype=np.uint8).tobytes())
    return b"".join(parts)


def loads_pfld(data: bytes) -> Field:
    if len(data) < _HEADER.size:
        raise PFLDError(f"truncated header ({len(data)} bytes)")
    magic, version, n, N, T, has_mask = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise PFLDError(f"bad magic {magic!r}")
    if version != VERSION:
        raise PFLDError(f"unsupported PFLD version {version}")
    if has_mask not in (0, 1):
        raise PFLDError(f"bad mask flag {has_mask}")
    grid = GridSpec(n, N, T)
    count = grid.size
    expected = _HEADER.size + 8 * count + (count if has_mask else 0)
    if len(data) != expected:
        raise PFLDError(f"expected {expected} bytes for n={n}, N={N}, got {len(data)}")
    off = _HEADER.size
    values = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(np.float64)
    mask = None
    if has_mask:
        mask = np.frombuffer(data, dtype=np.uint8, count=count, offset=off + 8 * count).astype(bool)
    return Field(grid, values, mask)


def save_pfld(path, f: Field) -> None:
    Path(path).write_bytes(dumps_pfld(f))


def load_pfld(path) -> Field:
    return loads_pfld(Path(path).read_bytes())


def save_pgm(path, f: Field) -> None:
    """Binary P5 greyscale, pixel = round(255*u) clipped to [0, 255].

    Rows follow the first storage axis, columns the second.
    """
    if f.grid.n != 2:
        raise ValueError("PGM output needs a 2D field")
    pix = np.clip(np.rint(255.0 * f.values), 0, 255).astype(np.uint8)
    rows, cols = pix.shape
    Path(path).write_bytes(f"P5\n{cols} {rows}\n255\n".encode("ascii") + pix.tobytes())
