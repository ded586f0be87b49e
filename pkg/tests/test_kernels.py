"""The numba and numpy code paths must agree."""
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import ndimage

from phasedrop import _accel
from phasedrop.kernels import (label_periodic, label_periodic_numba, label_periodic_numpy, solve_shift,
                               solve_shift_numba, solve_shift_numpy)


def test_flag_reports_state():
    assert isinstance(_accel.use_numba(), bool)


@given(seed=st.integers(0, 10_000), size=st.integers(1, 60), frac=st.floats(0.01, 0.99))
def test_shift_paths_agree(seed, size, frac):
    v = np.random.default_rng(seed).normal(0.5, 1.0, size)
    target = frac * size
    t1 = solve_shift_numba(v, target, 1e-12)
    t2 = solve_shift_numpy(v, target, 1e-12)
    for t in (t1, t2):
        assert np.clip(v - t, 0, 1).sum() == pytest.approx(target, abs=1e-10)
    assert solve_shift(v, target, 1e-12) in (t1, t2)


def test_shift_exact_linear_piece():
    v = np.full(4, 2.0)
    tau = solve_shift(v, 2.0, 1e-14)
    assert tau == pytest.approx(1.5, abs=1e-14)


def _canonical(labels):
    # partition as a set of frozensets of flat indices
    out = set()
    for lab in np.unique(labels):
        if lab:
            out.add(frozenset(np.flatnonzero(labels == lab)))
    return out


def _torus_oracle(mask):
    # label a 3x3 tiling without wrap, then read off the central tile
    shape = mask.shape
    big = np.tile(mask, (3,) * mask.ndim)
    lab, _ = ndimage.label(big, structure=ndimage.generate_binary_structure(mask.ndim, 1))
    centre = lab[tuple(slice(s, 2 * s) for s in shape)]
    # pixels in the same torus class are connected in the tiling through some copy
    parent = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            a = parent[a]
        return a

    for offs in np.ndindex(*(3,) * mask.ndim):
        tile = lab[tuple(slice(o * s, (o + 1) * s) for o, s in zip(offs, shape))]
        for a, b in zip(centre[mask], tile[mask]):
            ra, rb = find(("c", int(a))), find(("t", int(b)))
            if ra != rb:
                parent[ra] = rb
    roots = np.zeros(shape, dtype=np.int64)
    ids = {}
    for idx in zip(*np.nonzero(mask)):
        r = find(("c", int(centre[idx])))
        roots[idx] = ids.setdefault(r, len(ids) + 1)
    return roots


@given(seed=st.integers(0, 10_000), n=st.sampled_from([1, 2, 3]), p=st.floats(0.2, 0.7))
def test_label_paths_agree_with_oracle(seed, n, p):
    shape = {1: (17,), 2: (9, 7), 3: (5, 4, 6)}[n]
    mask = np.random.default_rng(seed).random(shape) < p
    a, ca = label_periodic_numba(mask)
    b, cb = label_periodic_numpy(mask)
    assert ca == cb
    assert np.array_equal(a, b)  # same first-scan numbering
    assert _canonical(a) == _canonical(_torus_oracle(mask))


def test_label_order_and_background():
    mask = np.zeros((6, 6), dtype=bool)
    mask[4, 4] = True
    mask[1, 1] = True
    lab, count = label_periodic(mask)
    assert count == 2
    assert lab[1, 1] == 1 and lab[4, 4] == 2 and lab[0, 0] == 0


def test_empty_mask():
    lab, count = label_periodic(np.zeros((4, 4), dtype=bool))
    assert count == 0 and not lab.any()
