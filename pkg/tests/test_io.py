import struct

import numpy as np
import pytest

from phasedrop.grid import Field, GridSpec
from phasedrop.io import PFLDError, dumps_pfld, load_pfld, loads_pfld, save_pfld, save_pgm


def test_header_layout():
    g = GridSpec(2, 4, 1.5)
    f = Field(g, np.arange(16.0))
    data = dumps_pfld(f)
    assert data[:4] == bytes([0x50, 0x46, 0x4C, 0x44])
    version, n, N = struct.unpack_from("<III", data, 4)
    assert (version, n, N) == (1, 2, 4)
    assert struct.unpack_from("<d", data, 16)[0] == 1.5
    assert data[24] == 0
    assert len(data) == 25 + 16 * 8
    assert np.frombuffer(data[25:], "<f8")[5] == 5.0


def test_round_trip_with_mask(tmp_path, rng):
    g = GridSpec(2, 8, 3.0)
    mask = rng.random(g.shape) > 0.5
    f = Field(g, rng.random(g.shape), mask)
    save_pfld(tmp_path / "f.pfld", f)
    back = load_pfld(tmp_path / "f.pfld")
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    assert np.array_equal(back.mask, mask)


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: b"XXXX" + d[4:], "magic"),
    (lambda d: d[:4] + struct.pack("<I", 2) + d[8:], "version"),
    (lambda d: d[:-1], "expected"),
    (lambda d: d[:10], "truncated"),
    (lambda d: d[:24] + b"\x07" + d[25:], "flag"),
])
def test_corrupt_files_rejected(mutate, msg):
    data = dumps_pfld(Field(GridSpec(1, 4, 1.0), np.zeros(4)))
    with pytest.raises(PFLDError, match=msg):
        loads_pfld(mutate(data))


def test_pgm(tmp_path):
    g = GridSpec(2, 4, 1.0)
    u = np.zeros(g.shape)
    u[0, 1] = 1.0
    u[2, 3] = 0.5
    u[3, 3] = 1.7
    save_pgm(tmp_path / "a.pgm", Field(g, u))
    raw = (tmp_path / "a.pgm").read_bytes()
    header = b"P5\n4 4\n255\n"
    assert raw.startswith(header)
    pix = np.frombuffer(raw[len(header):], np.uint8).reshape(4, 4)
    assert pix[0, 1] == 255 and pix[2, 3] == 128 and pix[3, 3] == 255 and pix[1, 1] == 0
    with pytest.raises(ValueError):
        save_pgm(tmp_path / "b.pgm", Field(GridSpec(1, 4, 1.0), np.zeros(4)))
