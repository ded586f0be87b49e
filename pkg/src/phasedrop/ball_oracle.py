"""Quadrature ground truth for the Riesz energy of disks and ball energies.

For the disk of radius R the double integral over B x B depends on x - y
only, so it collapses to a one-dimensional integral against the overlap
area of two disks at distance d::

    int_{BxB} g(|x - y|) dx dy = int_0^{2R} g(d) L_R(d) 2 pi d dd,
    L_R(d) = 2 R^2 acos(d / 2R) - (d/2) sqrt(4R^2 - d^2)

``ball_riesz_polar`` keeps the three-dimensional polar form (one angle
removed by rotational symmetry) as an independent cross-check.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from scipy import integrate

from .grid import ball_volume


class QuadratureError(RuntimeError):
    """Quadrature budget exhausted; carries the achieved error estimate."""

    def __init__(self, message: str, value: float, error_estimate: float):
        super().__init__(f"{message} (value {value:.12g}, error estimate {error_estimate:.3e})")
        self.value = value
        self.error_estimate = error_estimate


class UnsupportedDimension(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    epsilon: float
    abs_tol: float = 1e-12
    max_evals: int = 2000  # subinterval limit for the adaptive 1D rule

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")


def _check(n: int, alpha: float) -> None:
    if n != 2:
        raise UnsupportedDimension(f"disk quadrature is two-dimensional only, got n={n}")
    if not 0 < alpha < 2:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")


def lens_area(d: float, R: float) -> float:
    """Area of the intersection of two disks of radius R with centres d apart."""
    if d >= 2 * R:
        return 0.0
    return 2 * R * R * math.acos(d / (2 * R)) - 0.5 * d * math.sqrt(4 * R * R - d * d)


def _quad(f, a, b, points, tol, limit, what, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, *rest = integrate.quad(f, a, b, points=points, epsabs=tol, epsrel=1e-13,
                                         limit=limit, full_output=1, **kw)
    if len(rest) >= 2 and rest[0].get("last", 0) >= limit and err > tol:
        raise QuadratureError(f"{what}: subdivision budget {limit} exhausted", val, err)
    if err > max(tol, 1e-10 * abs(val)):
        raise QuadratureError(f"{what}: tolerance not reached", val, err)
    return val


def ball_riesz_regularized(n: int, alpha: float, radius: float, spec: QuadratureSpec) -> float:
    """``int_{BxB} dx dy / (|x - y|^(n - alpha) + eps)`` for the disk of given radius."""
    _check(n, alpha)
    if radius <= 0:
        return 0.0
    R = float(radius)
    eps = spec.epsilon
    p = n - alpha

    def integrand(d):
        return 2 * math.pi * d * lens_area(d, R) / (d ** p + eps)

    # the integrand changes scale where d^p ~ eps
    s = eps ** (1.0 / p)
    points = [q for q in (0.1 * s, s, 10 * s, 100 * s) if 0 < q < 2 * R][:max(spec.max_evals - 1, 0)] or None
    return _quad(integrand, 0.0, 2 * R, points, spec.abs_tol, spec.max_evals, "regularized disk energy")


def ball_riesz_exact(alpha: float, radius: float = 1.0, abs_tol: float = 1e-13) -> float:
    """Unregularised ``V_alpha`` of the disk, integrating ``d^(alpha-1)`` with an algebraic weight."""
    _check(2, alpha)
    if radius <= 0:
        return 0.0
    R = float(radius)
    return _quad(lambda d: 2 * math.pi * lens_area(d, R), 0.0, 2 * R, None, abs_tol, 500,
                 "disk energy", weight="alg", wvar=(alpha - 1.0, 0.0))


def ball_riesz_polar(alpha: float, radius: float, epsilon: float, abs_tol: float = 1e-9) -> float:
    """Same regularised integral in polar coordinates (three nested quadratures).

    x = (rho, 0) after fixing its angle, y = (s cos phi, s sin phi); the
    phi-integral runs over [0, pi] and is doubled.
    """
    _check(2, alpha)
    if radius <= 0:
        return 0.0
    R = float(radius)
    p = 2.0 - alpha

    def inner(phi, s, rho):
        d2 = rho * rho + s * s - 2 * rho * s * math.cos(phi)
        return s / (max(d2, 0.0) ** (p / 2) + epsilon)

    def over_s(rho):
        def over_phi(s):
            pts = [1e-3] if abs(s - rho) < 0.1 else None
            return 2 * integrate.quad(inner, 0.0, math.pi, args=(s, rho), points=pts,
                                      epsabs=abs_tol, epsrel=1e-10, limit=200)[0]
        return integrate.quad(over_phi, 0.0, R, points=[rho] if 0 < rho < R else None,
                              epsabs=abs_tol, epsrel=1e-10, limit=200)[0]

    val = integrate.quad(lambda rho: 2 * math.pi * rho * over_s(rho), 0.0, R,
                         epsabs=abs_tol, epsrel=1e-10, limit=100)[0]
    return val


def leading_error_exponent(alpha: float) -> float:
    """Exponent q in ``V - V_eps ~ eps^q`` for the disk (log factor at alpha = 1).

    Substituting ``d = eps^(1/(2-alpha)) t`` in the defect integral gives
    ``q = alpha/(2 - alpha)`` for alpha < 1; for alpha >= 1 the defect is
    dominated by ``eps * int d^(2alpha-3) ...`` and q = 1.
    """
    _check(2, alpha)
    return alpha / (2.0 - alpha) if alpha < 1 else 1.0


def richardson(alpha: float, radius: float, epsilons: Sequence[float],
               abs_tol: float = 1e-13, exponent: float | None = None) -> float:
    """Richardson extrapolation of ``V_eps`` to eps = 0 from the two smallest eps."""
    eps = sorted(float(e) for e in epsilons)
    if len(eps) < 2:
        raise ValueError("need at least two epsilon values")
    q = leading_error_exponent(alpha) if exponent is None else exponent
    e1, e2 = eps[0], eps[1]
    v1 = ball_riesz_regularized(2, alpha, radius, QuadratureSpec(e1, abs_tol))
    v2 = ball_riesz_regularized(2, alpha, radius, QuadratureSpec(e2, abs_tol))
    r = (e2 / e1) ** q
    return (r * v1 - v2) / (r - 1.0)


def regularization_error_bound(n: int, alpha: float, epsilon: float) -> float:
    """Closed-form bound on ``V(B[1]) - V_eps(B[1])`` for the unit-area disk.

    ``(2 pi/alpha)(2/(2-alpha))((2-alpha)/alpha)^(alpha/2) (eps/pi^(alpha/2))^(alpha/2)``,
    which is ``4 pi^(3/4) sqrt(eps)`` at alpha = 1.
    """
    _check(n, alpha)
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0:
        return 0.0
    a = alpha
    return (2 * math.pi / a) * (2 / (2 - a)) * ((2 - a) / a) ** (a / 2) * (epsilon / math.pi ** (a / 2)) ** (a / 2)


def unit_area_radius(n: int = 2) -> float:
    return (1.0 / ball_volume(n)) ** (1.0 / n)


def ball_perimeter(n: int) -> float:
    """Surface area of the unit sphere, P(B) = n |B|."""
    return n * ball_volume(n)


def ball_energy_f(m: float, n: int, alpha: float, V_unit: float) -> float:
    """Energy ``P(B[m]) + V(B[m])`` of the ball of volume m, from the unit-radius value."""
    if not m > 0:
        raise ValueError("mass must be positive")
    lam = (m / ball_volume(n)) ** (1.0 / n)
    return ball_perimeter(n) * lam ** (n - 1) + V_unit * lam ** (n + alpha)


def critical_mass(k: int, n: int, alpha: float, V_unit: float) -> float:
    """Mass at which k and k+1 equal, infinitely separated balls have equal energy."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ratio = ((k + 1) ** (1 / n) - k ** (1 / n)) / (k ** (-alpha / n) - (k + 1) ** (-alpha / n))
    return ball_volume(n) * (ratio * ball_perimeter(n) / V_unit) ** (n / (1 + alpha))


def cm_from_mass(m: float, n: int, alpha: float) -> float:
    if not m > 0:
        raise ValueError("mass must be positive")
    return m ** ((1 + alpha) / n)


def mass_from_cm(c_m: float, n: int, alpha: float) -> float:
    if not c_m > 0:
        raise ValueError("c_m must be positive")
    return c_m ** (n / (1 + alpha))


def critical_mass_table(k_max: int, n: int, alpha: float, V_unit: float) -> list[tuple[int, float, float]]:
    """Rows ``(k, m_k, c_m(m_k))`` for k = 1..k_max."""
    rows = []
    for k in range(1, k_max + 1):
        mk = critical_mass(k, n, alpha, V_unit)
        rows.append((k, mk, cm_from_mass(mk, n, alpha)))
    return rows


def unit_disk_energy(alpha: float) -> float:
    """V_alpha of the unit-radius disk (direct singular quadrature)."""
    return ball_riesz_exact(alpha, 1.0)
