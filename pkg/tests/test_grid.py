import numpy as np
import pytest
from hypothesis import given, strategies as st

from phasedrop.grid import (Field, GridError, GridSpec, Spectrum, analyze, ball_indicator,
                            node_coordinates, omega_mask, synthesize)


def test_gridspec_validation():
    with pytest.raises(GridError):
        GridSpec(2, 7, 1.0)
    with pytest.raises(GridError):
        GridSpec(2, 2, 1.0)
    with pytest.raises(GridError):
        GridSpec(2, 8, 0.0)
    with pytest.raises(GridError):
        GridSpec(0, 8, 1.0)
    g = GridSpec(3, 8, 4.0)
    assert g.h == 0.5 and g.shape == (8, 8, 8) and g.size == 512


def test_storage_order():
    g = GridSpec(1, 8, 8.0)
    assert list(g.axis_indices()) == [-3, -2, -1, 0, 1, 2, 3, 4]
    assert g.axis_coordinates()[0] == pytest.approx(-g.T / 2 + g.h)


def test_constant_field_spectrum():
    g = GridSpec(2, 8, 3.0)
    s = analyze(Field(g, np.ones(g.shape)))
    assert s.coefficient((0, 0)) == pytest.approx(g.T ** 2)
    rest = np.abs(s.coeffs).copy()
    rest[g.N // 2 - 1, g.N // 2 - 1] = 0
    assert rest.max() <= 1e-12 * g.T ** 2


def test_cosine_mode_coefficients():
    g = GridSpec(2, 16, 20 * np.pi)
    x1 = g.coordinates()[0]
    u = np.cos(2 * np.pi * x1 / g.T) * np.ones(g.shape)
    s = analyze(Field(g, u))
    assert s.coefficient((1, 0)).real == pytest.approx(g.T ** 2 / 2, rel=1e-12)
    assert s.coefficient((-1, 0)).real == pytest.approx(g.T ** 2 / 2, rel=1e-12)
    mag = np.abs(s.coeffs)
    mag[g.N // 2, g.N // 2 - 1] = 0
    mag[g.N // 2 - 2, g.N // 2 - 1] = 0
    assert mag.max() <= 1e-12 * g.T ** 2


def test_parseval_random(rng):
    g = GridSpec(2, 8, 2.5)
    u = rng.standard_normal(g.shape)
    s = analyze(Field(g, u))
    lhs = g.cell_volume * np.sum(u ** 2)
    rhs = np.sum(np.abs(s.coeffs) ** 2) / g.T ** g.n
    assert lhs == pytest.approx(rhs, rel=1e-12)


@given(n=st.sampled_from([1, 2]), N=st.sampled_from([4, 8, 16]), seed=st.integers(0, 10_000),
       T=st.floats(0.5, 100.0))
def test_round_trip_property(n, N, seed, T):
    g = GridSpec(n, N, T)
    u = np.random.default_rng(seed).standard_normal(g.shape)
    back = synthesize(analyze(Field(g, u))).values
    assert np.max(np.abs(back - u)) <= 1e-12 * max(1.0, np.max(np.abs(u)))
    s = analyze(Field(g, u))
    s2 = analyze(synthesize(s))
    assert np.max(np.abs(s2.coeffs - s.coeffs)) <= 1e-12 * np.max(np.abs(s.coeffs))


@given(n=st.sampled_from([1, 2]), N=st.sampled_from([4, 8, 16]), seed=st.integers(0, 10_000))
def test_parseval_property(n, N, seed):
    g = GridSpec(n, N, 7.0)
    u = np.random.default_rng(seed).standard_normal(g.shape)
    s = analyze(Field(g, u))
    assert g.cell_volume * np.sum(u ** 2) == pytest.approx(np.sum(np.abs(s.coeffs) ** 2) / g.T ** n, rel=1e-12)


@given(k1=st.integers(-7, 7), k2=st.integers(-7, 7))
def test_pure_mode_concentration(k1, k2):
    g = GridSpec(2, 16, 5.0)
    x1, x2 = g.coordinates()
    u = np.cos(2 * np.pi * (k1 * x1 + k2 * x2) / g.T)
    s = analyze(Field(g, u))
    power = np.abs(s.coeffs) ** 2
    total = power.sum()
    idx = {(k1, k2), (-k1, -k2)}
    on = sum(power[a + g.N // 2 - 1, b + g.N // 2 - 1] for a, b in idx)
    assert on >= (1 - 1e-10) * total


def test_synthesize_zero_and_constant():
    g = GridSpec(2, 8, 4.0)
    zero = synthesize(Spectrum(g, np.zeros(g.shape, dtype=complex)))
    assert np.all(zero.values == 0)
    c = np.zeros(g.shape, dtype=complex)
    c[g.N // 2 - 1, g.N // 2 - 1] = g.T ** 2
    assert np.allclose(synthesize(Spectrum(g, c)).values, 1.0, atol=1e-13)


def test_synthesize_rejects_asymmetric():
    g = GridSpec(1, 8, 1.0)
    c = np.zeros(g.shape, dtype=complex)
    c[g.N // 2] = 1.0  # k = 1 without its k = -1 partner
    with pytest.raises(GridError, match="violation"):
        synthesize(Spectrum(g, c))


def test_structural_errors():
    g = GridSpec(2, 8, 1.0)
    with pytest.raises(GridError):
        Field(g, np.zeros(10))
    with pytest.raises(GridError):
        Field(g, np.zeros(64), mask=np.ones(3, dtype=bool))
    with pytest.raises(GridError):
        synthesize(Spectrum(g, np.zeros((4, 4), dtype=complex)))


def test_node_coordinates():
    g = GridSpec(2, 2 ** 11, 20 * np.pi)
    assert np.all(node_coordinates(g, (0, 0)) == 0)
    assert node_coordinates(g, (g.N // 2, 0)) == pytest.approx([10 * np.pi, 0])
    lo = -g.N // 2 + 1
    assert node_coordinates(g, (lo, lo)) == pytest.approx([-g.T / 2 + g.h] * 2)
    with pytest.raises(GridError):
        node_coordinates(g, (g.N // 2 + 1, 0))
    with pytest.raises(GridError):
        node_coordinates(g, (0,))


def test_omega_masks():
    g = GridSpec(2, 256, 20 * np.pi)
    sq = omega_mask(g, "square", np.pi)
    half = np.pi / (2 * np.sqrt(2))
    x = g.axis_coordinates()
    inside = np.count_nonzero(np.abs(x) <= half)
    assert sq.sum() == inside ** 2
    disk = omega_mask(g, "disk", np.pi)
    assert np.all(g.radius()[disk] <= np.pi / 2)
    assert omega_mask(g, "none").all()
    with pytest.raises(GridError):
        omega_mask(g, "triangle")


def test_ball_indicator_area():
    g = GridSpec(2, 512, 8.0)
    b = ball_indicator(g, 1.0)
    assert b.sum() * g.cell_volume == pytest.approx(1.0, rel=0.02)
    # a ball centred on the seam is split across both edges
    shifted = ball_indicator(g, 1.0, center=(g.T / 2, 0.0))
    assert shifted[0].any() and shifted[-1].any()
