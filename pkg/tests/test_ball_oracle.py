import math

import pytest
from hypothesis import given, settings, strategies as st

from phasedrop.ball_oracle import (QuadratureError, QuadratureSpec, UnsupportedDimension, ball_energy_f,
                                   ball_riesz_exact, ball_riesz_polar, ball_riesz_regularized, cm_from_mass,
                                   critical_mass, critical_mass_table, leading_error_exponent, mass_from_cm,
                                   regularization_error_bound, richardson, unit_area_radius)

V_DISK = 16 * math.pi / 3  # unit disk, alpha = 1


def test_radius_zero():
    assert ball_riesz_regularized(2, 1.0, 0.0, QuadratureSpec(1e-3)) == 0.0
    assert ball_riesz_exact(1.0, 0.0) == 0.0


def test_scaling_limit():
    spec = QuadratureSpec(1e-6)
    r = ball_riesz_regularized(2, 1.0, 2.0, spec) / ball_riesz_regularized(2, 1.0, 1.0, spec)
    assert r == pytest.approx(8.0, rel=1e-2)


def test_richardson_limit_unit_disk():
    v = richardson(1.0, 1.0, [1e-4, 1e-5, 1e-6])
    assert v == pytest.approx(V_DISK, rel=1e-4)


def test_exact_disk_value():
    # the lens reduction gives int_0^2 2 pi L(d) dd = 16 pi / 3 in closed form
    assert ball_riesz_exact(1.0) == pytest.approx(V_DISK, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_exact_scaling(alpha):
    assert ball_riesz_exact(alpha, 1.7) / ball_riesz_exact(alpha) == pytest.approx(1.7 ** (2 + alpha), rel=1e-11)


def test_polar_cross_check():
    a = ball_riesz_regularized(2, 1.0, 1.0, QuadratureSpec(1e-2))
    b = ball_riesz_polar(1.0, 1.0, 1e-2)
    assert a == pytest.approx(b, rel=1e-6)


@settings(max_examples=20)
@given(alpha=st.floats(0.2, 1.8), e=st.floats(1e-6, 1e-1))
def test_monotone_in_epsilon(alpha, e):
    a = ball_riesz_regularized(2, alpha, 1.0, QuadratureSpec(e, 1e-10))
    b = ball_riesz_regularized(2, alpha, 1.0, QuadratureSpec(e / 3, 1e-10))
    assert b >= a - 1e-9


def test_unsupported_dimension():
    with pytest.raises(UnsupportedDimension):
        ball_riesz_regularized(3, 1.0, 1.0, QuadratureSpec(1e-3))


def test_budget_exhausted_reports_estimate():
    with pytest.raises(QuadratureError) as info:
        ball_riesz_regularized(2, 0.3, 1.0, QuadratureSpec(1e-9, abs_tol=1e-15, max_evals=3))
    assert info.value.error_estimate > 0
    assert "error estimate" in str(info.value)


def test_bound_closed_form():
    # 4 pi^(3/4) * 1e-2 = 0.094389...
    assert regularization_error_bound(2, 1.0, 1e-4) == pytest.approx(4 * math.pi ** 0.75 * 1e-2, rel=1e-14)
    assert regularization_error_bound(2, 1.0, 1e-4) == pytest.approx(0.0943892, abs=1e-7)
    assert regularization_error_bound(2, 1.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        regularization_error_bound(2, 2.0, 1e-3)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_bound_dominates_observed_change(alpha, eps):
    R = unit_area_radius(2)
    d = abs(ball_riesz_regularized(2, alpha, R, QuadratureSpec(eps))
            - ball_riesz_regularized(2, alpha, R, QuadratureSpec(eps / 100)))
    assert d <= regularization_error_bound(2, alpha, eps)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_bound_dominates_true_error(alpha):
    R = unit_area_radius(2)
    exact = ball_riesz_exact(alpha, R)
    for eps in (1e-2, 1e-3, 1e-4):
        err = exact - ball_riesz_regularized(2, alpha, R, QuadratureSpec(eps))
        assert 0 <= err <= regularization_error_bound(2, alpha, eps)


def test_error_exponent():
    assert leading_error_exponent(0.5) == pytest.approx(1 / 3)
    assert leading_error_exponent(1.0) == 1.0
    assert leading_error_exponent(1.5) == 1.0


def test_ball_energy_examples():
    assert ball_energy_f(math.pi, 2, 1.0, 5.0) == pytest.approx(2 * math.pi + 5.0, rel=1e-15)
    assert ball_energy_f(4.0, 2, 1.0, 0.0) / ball_energy_f(1.0, 2, 1.0, 0.0) == pytest.approx(2.0, rel=1e-14)
    assert ball_energy_f(math.pi, 2, 1.0, V_DISK) == pytest.approx(22 * math.pi / 3, rel=1e-14)
    with pytest.raises(ValueError):
        ball_energy_f(0.0, 2, 1.0, 1.0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("k", range(1, 11))
def test_critical_mass_equalizes(k, alpha):
    V = ball_riesz_exact(alpha)
    m = critical_mass(k, 2, alpha, V)
    lhs = k * ball_energy_f(m / k, 2, alpha, V)
    rhs = (k + 1) * ball_energy_f(m / (k + 1), 2, alpha, V)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_critical_mass_values():
    m1 = critical_mass(1, 2, 1.0, V_DISK)
    assert m1 == pytest.approx(3 * math.sqrt(2) / 8 * math.pi, rel=1e-14)
    assert m1 == pytest.approx(1.666, abs=1e-3)
    assert cm_from_mass(m1, 2, 1.0) == pytest.approx(1.67, abs=5e-3)
    table = critical_mass_table(6, 2, 1.0, V_DISK)
    masses = [r[1] for r in table]
    assert masses == sorted(masses) and len(set(masses)) == 6
    with pytest.raises(ValueError):
        critical_mass(0, 2, 1.0, V_DISK)


@given(m=st.floats(1e-6, 1e6), alpha=st.floats(0.05, 1.95), n=st.sampled_from([1, 2, 3]))
def test_cm_mass_inverse(m, alpha, n):
    assert mass_from_cm(cm_from_mass(m, n, alpha), n, alpha) == pytest.approx(m, rel=1e-12)


def test_cm_examples():
    assert cm_from_mass(1.0, 2, 0.3) == 1.0
    assert cm_from_mass(2.5, 2, 1.0) == pytest.approx(2.5, rel=1e-15)
