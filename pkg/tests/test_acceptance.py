"""End-to-end acceptance checks, one group per criterion.

A summary line per criterion is printed at the end of the session by the
hook in conftest.py.
"""
import itertools
import math

import numpy as np
import pytest

from phasedrop.ball_oracle import (QuadratureSpec, ball_energy_f, ball_riesz_exact, ball_riesz_regularized,
                                   cm_from_mass, critical_mass, regularization_error_bound, unit_area_radius,
                                   unit_disk_energy)
from phasedrop.cli import t_table_rows
from phasedrop.energy import (EnergyParams, SpectralKernel, dirichlet_energy, dirichlet_gradient,
                              double_well_energy, double_well_gradient, make_model, potential_energy,
                              potential_gradient, riesz_energy, riesz_gradient)
from phasedrop.grid import Field, GridSpec, omega_mask
from phasedrop.optimizer import OptimizerConfig, multistart, optimize, project_feasible
from phasedrop.shapes import shape_report
from phasedrop.stability import (REGIMES, StabilityParams, classify_regime, f_k_eval, gamma_star_k, min_f_k,
                                 mu_k)

from test_optimizer import brute_force_projection


def criterion(number, title):
    return pytest.mark.criterion(number, title)


# ---------------------------------------------------------------- 1

@criterion(1, "spectral accuracy table")
@pytest.mark.parametrize("T_over_pi,expected,tol", [(5, 0.08, 0.02), (10, 0.04, 0.01), (20, 0.01, 0.005)])
def test_c1_t_table(T_over_pi, expected, tol):
    ((_, _, err),) = t_table_rows(1.0, 2048, [T_over_pi * math.pi])
    assert abs(abs(err) - expected) <= tol, f"relative error {err:.5f}"


# ---------------------------------------------------------------- 2

@criterion(2, "critical-mass cross-check")
def test_c2_first_critical_mass():
    m1 = critical_mass(1, 2, 1.0, unit_disk_energy(1.0))
    assert cm_from_mass(m1, 2, 1.0) == pytest.approx(1.67, abs=0.02)


@criterion(2, "critical-mass cross-check")
def test_c2_defining_identity():
    V = unit_disk_energy(1.0)
    for k in range(1, 11):
        m = critical_mass(k, 2, 1.0, V)
        lhs = k * ball_energy_f(m / k, 2, 1.0, V)
        rhs = (k + 1) * ball_energy_f(m / (k + 1), 2, 1.0, V)
        assert abs(lhs - rhs) <= 1e-10 * abs(rhs)


# ---------------------------------------------------------------- 3

EPS = [1e-2, 1e-3, 1e-4, 1e-5]


def _defects(alpha):
    R = unit_area_radius(2)
    exact = ball_riesz_exact(alpha, R)
    return np.array([exact - ball_riesz_regularized(2, alpha, R, QuadratureSpec(e)) for e in EPS])


@criterion(3, "quadrature error law")
@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_c3_error_slope(alpha):
    slope = np.polyfit(np.log(EPS), np.log(_defects(alpha)), 1)[0]
    assert abs(slope - alpha / 2) <= 0.1, f"log-log slope {slope:.3f}, expected {alpha / 2:.3f}"


@criterion(3, "quadrature error law")
@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_c3_bound_dominates(alpha):
    d = _defects(alpha)
    bound = np.array([regularization_error_bound(2, alpha, e) for e in EPS])
    assert np.all(d > 0) and np.all(d <= bound)
    if alpha == 1.0:
        assert np.allclose(bound, 4 * math.pi ** 0.75 * np.sqrt(EPS), rtol=1e-14)


# ---------------------------------------------------------------- 4

DROP_GRID = GridSpec(2, 256, 20 * math.pi)
DROP_CONFIG = OptimizerConfig(seed=0, restarts=5, start_pool=("balls:1", "balls:2", "balls:3", "balls:4"),
                             continuation=(2.0, 1.5), continuation_mode="both")


def _drop_run(omega, c_m, A=0.0, beta=1.0):
    g = DROP_GRID
    p = EnergyParams(alpha=1.0, epsilon=0.4 * g.h, repulsion_multiplier=c_m, kappa_W=1.0, A=A, beta=beta)
    res = multistart(g, p, DROP_CONFIG, mask=omega_mask(g, omega, math.pi))
    return shape_report(res.field)


@pytest.fixture(scope="module")
def disk_unconfined():
    return _drop_run("disk", 3.0)


@criterion(4, "confined multi-drop phenomenology")
def test_c4_square_single_drop():
    rep = _drop_run("square", 1.5)
    assert rep.count == 1


@criterion(4, "confined multi-drop phenomenology")
def test_c4_square_splits_in_two():
    rep = _drop_run("square", 1.6)
    assert rep.count == 2
    a, b = rep.areas()
    assert abs(a / b - 1) <= 0.15
    c1, c2 = (c.centroid for c in rep.components)
    assert np.all(np.sign(c1) == -np.sign(c2)) and np.all(c1 != 0)


@criterion(4, "confined multi-drop phenomenology")
def test_c4_disk_three_drops_near_boundary(disk_unconfined):
    rep = disk_unconfined
    R = math.pi / 2
    assert rep.count == 3, f"{rep.count} components"
    for c in rep.components:
        assert c.centroid_radius + c.radius >= R - 2 * DROP_GRID.h


@criterion(4, "confined multi-drop phenomenology")
def test_c4_confinement_pulls_drops_inward(disk_unconfined):
    rep = _drop_run("disk", 3.0, A=1.0, beta=16.0)
    assert rep.count >= 1
    assert rep.mean_centroid_radius < disk_unconfined.mean_centroid_radius


# ---------------------------------------------------------------- 5

def _fd(fun, u, step=1e-6):
    flat = u.ravel()
    g = np.empty(u.size)
    for i in range(u.size):
        up, dn = flat.copy(), flat.copy()
        up[i] += step
        dn[i] -= step
        g[i] = (fun(up.reshape(u.shape)) - fun(dn.reshape(u.shape))) / (2 * step)
    return g.reshape(u.shape)


# alpha must lie in (0, n), so n = 1 only admits alpha = 0.5
GRADIENT_CASES = [(n, N, a) for n, N, a in itertools.product((1, 2), (8, 16), (0.5, 1.0, 1.5)) if a < n]


@criterion(5, "gradient correctness")
@pytest.mark.parametrize("case", range(50))
def test_c5_gradients(case):
    n, N, alpha = GRADIENT_CASES[case % len(GRADIENT_CASES)]
    rng = np.random.default_rng(1000 + case)
    g = GridSpec(n, N, float(rng.uniform(4, 12)))
    u = rng.random(g.shape)
    p = EnergyParams(alpha=alpha, epsilon=float(rng.uniform(0.2, 1.0)), repulsion_multiplier=float(rng.uniform(0.5, 3)),
                     A=float(rng.uniform(0, 2)), beta=float(rng.uniform(0.5, 3)))
    k = SpectralKernel.build(g, alpha)
    model = make_model(g, p)
    terms = [
        (lambda v: dirichlet_energy(Field(g, v)), dirichlet_gradient(Field(g, u)).values),
        (lambda v: double_well_energy(Field(g, v)), double_well_gradient(Field(g, u)).values),
        (lambda v: riesz_energy(Field(g, v), k), riesz_gradient(Field(g, u), k).values),
        (lambda v: potential_energy(Field(g, v), p), potential_gradient(Field(g, u), p).values),
        (lambda v: model.evaluate(v)[0].total, model.evaluate(u)[1]),
    ]
    for fun, grad in terms:
        fd = _fd(fun, u)
        scale = max(np.max(np.abs(fd)), 1e-12)
        assert np.max(np.abs(grad - fd)) <= 1e-6 * scale


# ---------------------------------------------------------------- 6

@criterion(6, "projection optimality")
@pytest.mark.parametrize("case", range(200))
def test_c6_projection(case):
    rng = np.random.default_rng(5000 + case)
    active = 4 + case % 3
    g = GridSpec(1, 6, 6.0)  # h = 1
    mask = np.zeros(6, bool)
    mask[rng.choice(6, active, replace=False)] = True
    v = np.where(mask, rng.normal(0.5, 1.0, 6), 0.0)
    m = float(rng.uniform(0.1, active - 0.1))
    u = project_feasible(Field(g, v, mask), m)
    oracle = brute_force_projection(v[mask], m)
    assert np.max(np.abs(u.values[mask] - oracle)) <= 1e-8
    again = project_feasible(u, m)
    assert np.max(np.abs(again.values - u.values)) <= 1e-12
    d = np.linalg.norm(u.values - v)
    for _ in range(1000):
        w = project_feasible(Field(g, np.where(mask, rng.normal(0.5, 2.0, 6), 0.0), mask), m).values
        assert d <= np.linalg.norm(w - v) + 1e-12


# ---------------------------------------------------------------- 7

@criterion(7, "stability atlas")
def test_c7_min_identity():
    for a, b, A in [(0.5, 1.5, 1.0), (0.5, 0.8, 1.0), (1.5, 2.5, 1.0), (0.3, 1.0, 5.0), (1.2, 3.0, 0.2)]:
        p = StabilityParams(2, a, b, A)
        for k in range(2, 60):
            direct = f_k_eval(gamma_star_k(k, p), k, p)
            assert min_f_k(k, p) == pytest.approx(direct, rel=1e-12, abs=1e-12)


@criterion(7, "stability atlas")
def test_c7_mu_sequence():
    for n, a in itertools.product((2, 3), (0.5, 1.0, 1.5)):
        assert np.all(np.diff(mu_k(n, a, np.arange(1, 51))) > 0)
    m999, m1000 = mu_k(2, 1.5, [999, 1000])
    assert m1000 - m999 < 1e-3 * m1000


@criterion(7, "stability atlas")
@pytest.mark.parametrize("args,case", [
    ((2, 1.5, 0.5, 1.0), "i"),
    ((2, 1.5, 2.5, 1.0), "iii"),
    ((2, 0.5, 0.8, 1.0), "iv"),
    ((2, 1.5, 1.5, 0.1), "ii"),
    ((2, 0.5, 1.0, 1.0), "v"),
])
def test_c7_regime_table(args, case):
    a, b = (classify_regime(StabilityParams(*args, k_max=km)) for km in (200, 400))
    assert a.regime == b.regime == REGIMES[case]
    assert a.conclusion == b.conclusion
    if case == "i":
        assert a.m_star_estimate is not None and math.isfinite(a.m_star_estimate)


# ---------------------------------------------------------------- 8

@criterion(8, "Modica-Mortola calibration")
@pytest.mark.parametrize("eps_h", [4, 8])
def test_c8_interface_energy(eps_h):
    g = GridSpec(1, 1024, 16.0)
    p = EnergyParams(alpha=0.5, epsilon=eps_h * g.h, repulsion_multiplier=0.0, mass=8.0)
    u0 = (np.abs(g.axis_coordinates()) <= 4.0).astype(float)
    res = optimize(Field(g, u0), p, OptimizerConfig(max_iters=20000, grad_tol=1e-9))
    per_jump = res.energy.total / 2
    assert per_jump == pytest.approx(p.kappa_W * math.pi / 4, rel=0.02)
