"""Linear stability of balls under the confined liquid-drop energy.

The ball ``B[m]`` with ``gamma = (m/|B|)^(1/n)`` is linearly stable when
every mode function

    f_k(gamma) = 1 - gamma^(1+alpha) (mu_k - mu_1)/(lambda_k - lambda_1)
                   + gamma^(1+beta) A beta/(lambda_k - lambda_1),   k >= 2

is positive. ``lambda_k = k(n+k-2)`` are the sphere Laplacian eigenvalues and
``mu_k`` the eigenvalues of the Riesz boundary operator.

The sets ``{gamma: f_k > 0 for all k}`` (strict) and ``{... >= 0}`` are
computed from the first ``k_max`` modes; the remaining modes are handled by
a tail certificate that is either proven from the growth of ``mu_k`` or
reported as uncertain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import digamma, gamma as gamma_fn, gammaln

from .grid import ball_volume

REGIMES = {
    "i": "(i) bounded-threshold",
    "ii": "(ii) all-masses-stable or bounded-threshold",
    "iii": "(iii) stable-above-m*",
    "iv": "(iv) unstable-above-m*",
    "v": "(v) A-dependent",
}


class StabilityDomainError(ValueError):
    pass


@dataclass(frozen=True)
class StabilityParams:
    n: int
    alpha: float
    beta: float
    A: float
    k_max: int = 200
    gamma_max: float | None = None
    knife_tol: float = 1e-9

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise StabilityDomainError(f"n must be an integer >= 2, got {self.n}")
        if not 0 < self.alpha < self.n:
            raise StabilityDomainError(f"alpha must lie in (0, n), got {self.alpha}")
        if not self.beta > 0:
            raise StabilityDomainError(f"beta must be positive, got {self.beta}")
        if not self.A > 0:
            raise StabilityDomainError(f"A must be positive, got {self.A}")
        if int(self.k_max) != self.k_max or self.k_max < 2:
            raise StabilityDomainError(f"k_max must be an integer >= 2, got {self.k_max}")
        if self.gamma_max is not None and not self.gamma_max > 0:
            raise StabilityDomainError("gamma_max must be positive")


# ---------------------------------------------------------------- spectra

def lambda_k(n: int, k) -> np.ndarray | float:
    """Eigenvalue ``k(n+k-2)`` of the Laplacian on the unit sphere."""
    k = np.asarray(k, dtype=float)
    out = k * (n + k - 2)
    return float(out) if out.ndim == 0 else out


def _log_ratio(n: int, alpha: float, k) -> np.ndarray:
    """log of Gamma(k + (n-alpha)/2) / Gamma(k + (n-2+alpha)/2)."""
    k = np.asarray(k, dtype=float)
    return gammaln(k + (n - alpha) / 2) - gammaln(k + (n - 2 + alpha) / 2)


def riesz_prefactor(n: int, alpha: float) -> float:
    """Positive constant ``c`` with ``mu_k ~ c k^(1-alpha)`` for alpha < 1."""
    return (2 ** (1 + alpha) * math.pi ** ((n - 1) / 2) / (1 - alpha)
            * gamma_fn((1 + alpha) / 2) / gamma_fn((n - alpha) / 2))


def mu_k(n: int, alpha: float, k) -> np.ndarray | float:
    """Eigenvalue of the Riesz boundary operator for degree-k harmonics.

    The Gamma-ratio difference is formed as ``r0 * expm1(log rk - log r0)``,
    which keeps full relative accuracy for small k and alpha near 1.
    """
    if not 0 < alpha < n:
        raise StabilityDomainError(f"alpha must lie in (0, n), got {alpha}")
    kk = np.asarray(k, dtype=float)
    if np.any(kk < 1):
        raise StabilityDomainError("mu_k needs k >= 1")
    if alpha == 1.0:
        c = 4 * math.pi ** ((n - 1) / 2) / gamma_fn((n - 1) / 2)
        out = c * (digamma(kk + (n - 1) / 2) - digamma((n - 1) / 2))
    else:
        l0 = float(_log_ratio(n, alpha, 0.0))
        diff = math.exp(l0) * np.expm1(_log_ratio(n, alpha, kk) - l0)  # r_k - r_0
        if alpha < 1:
            out = riesz_prefactor(n, alpha) * diff
        else:
            c = 2 ** alpha * math.pi ** ((n - 1) / 2) * gamma_fn((alpha - 1) / 2) / gamma_fn((n - alpha) / 2)
            out = -c * diff
    return float(out) if np.ndim(out) == 0 else out


def mu_sup(n: int, alpha: float) -> float:
    """``lim mu_k`` for alpha > 1 (the ratio r_k tends to 0); ``inf`` otherwise."""
    if alpha <= 1:
        return math.inf
    c = 2 ** alpha * math.pi ** ((n - 1) / 2) * gamma_fn((alpha - 1) / 2) / gamma_fn((n - alpha) / 2)
    return c * math.exp(float(_log_ratio(n, alpha, 0.0)))


# ------------------------------------------------------------ mode functions

def _q(k, p: StabilityParams):
    """(mu_k - mu_1)/(lambda_k - lambda_1) and A beta/(lambda_k - lambda_1)."""
    dl = lambda_k(p.n, k) - lambda_k(p.n, 1)
    dm = mu_k(p.n, p.alpha, k) - mu_k(p.n, p.alpha, 1)
    return dm / dl, p.A * p.beta / dl


def f_k_eval(gamma, k, params: StabilityParams):
    """Mode function ``f_k(gamma)``; broadcasts over gamma and k."""
    k = np.asarray(k)
    if np.any(k < 2):
        raise StabilityDomainError("f_k is defined for k >= 2")
    g = np.asarray(gamma, dtype=float)
    if np.any(g <= 0):
        raise StabilityDomainError("gamma must be positive")
    q, r = _q(k, params)
    out = 1.0 - g ** (1 + params.alpha) * q + g ** (1 + params.beta) * r
    return float(out) if np.ndim(out) == 0 else out


def gamma_star_k(k, params: StabilityParams):
    """Minimiser ``gamma_k`` of f_k when alpha < beta."""
    a, b = params.alpha, params.beta
    if not a < b:
        raise StabilityDomainError("gamma_k exists only for alpha < beta")
    dm = mu_k(params.n, a, k) - mu_k(params.n, a, 1)
    out = ((1 + a) * dm / (params.A * b * (1 + b))) ** (1 / (b - a))
    return float(out) if np.ndim(out) == 0 else out


def min_f_k(k, params: StabilityParams):
    """Closed form of ``f_k(gamma_k)`` for alpha < beta."""
    a, b, n = params.alpha, params.beta, params.n
    if not a < b:
        raise StabilityDomainError("closed-form minimum needs alpha < beta")
    dm = mu_k(n, a, k) - mu_k(n, a, 1)
    dl = lambda_k(n, k) - lambda_k(n, 1)
    lead = ((1 + a) / (params.A * b * (1 + b))) ** ((1 + a) / (b - a)) * (b - a) / (1 + b)
    out = 1.0 - lead * dm ** ((1 + b) / (b - a)) / dl
    return float(out) if np.ndim(out) == 0 else out


def case_v_constant(n: int, alpha: float) -> float:
    """Constant C with ``min f_k -> 1 - C / A^((1+alpha)/(1-alpha))`` when beta = 1 > alpha.

    Obtained by inserting ``mu_k - mu_1 ~ c k^(1-alpha)`` and ``lambda_k ~ k^2``
    into the closed-form minimum.
    """
    if not 0 < alpha < 1:
        raise StabilityDomainError("the beta = 1 constant needs alpha < 1")
    e = (1 + alpha) / (1 - alpha)
    return ((1 + alpha) / 2) ** e * (1 - alpha) / 2 * riesz_prefactor(n, alpha) ** (2 / (1 - alpha))


# ------------------------------------------------------------------- sets

@dataclass
class IntervalSet:
    """Finite union of intervals of (0, inf); ``(lo, hi, lo_closed, hi_closed)``."""

    intervals: list[tuple[float, float, bool, bool]]

    def contains(self, x: float) -> bool:
        for lo, hi, lc, hc in self.intervals:
            if (lo < x or (lc and x == lo)) and (x < hi or (hc and x == hi)):
                return True
        return False

    def bounded(self) -> bool:
        return all(math.isfinite(hi) for _, hi, _, _ in self.intervals)

    def describe(self) -> str:
        if not self.intervals:
            return "empty"
        parts = []
        for lo, hi, lc, hc in self.intervals:
            hi_s = "inf" if math.isinf(hi) else f"{hi:.10g}"
            parts.append(f"{'[' if lc else '('}{lo:.10g}, {hi_s}{']' if hc else ')'}")
        return " U ".join(parts)


def _complement(bad: list[tuple[float, float]], strict: bool) -> IntervalSet:
    """Complement in (0, inf) of a union of open (strict=False) or closed bad intervals."""
    bad = sorted(bad)
    merged: list[list[float]] = []
    for lo, hi in bad:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    out = []
    cur, cur_closed = 0.0, False
    for lo, hi in merged:
        if lo > cur or (lo == cur and cur_closed and not strict):
            out.append((cur, lo, cur_closed, not strict))
        cur, cur_closed = hi, not strict
    if math.isfinite(cur):
        out.append((cur, math.inf, cur_closed, False))
    return IntervalSet(out)


def _negative_interval(k: int, p: StabilityParams) -> tuple[float, float] | None:
    """Interval where f_k < 0 (f_k has at most one such interval), or None."""
    a, b = p.alpha, p.beta
    q, r = _q(k, p)
    if a > b:
        # increasing then decreasing, one zero
        hi = 1.0
        while f_k_eval(hi, k, p) > 0:
            hi *= 2
        z = optimize.brentq(lambda g: f_k_eval(g, k, p), hi / 2 if hi > 1 else 1e-300, hi,
                            xtol=1e-15, rtol=1e-15, maxiter=500)
        return (z, math.inf)
    if a == b:
        s = q - r
        if s <= 0:
            return None
        return ((1.0 / s) ** (1 / (1 + a)), math.inf)
    gk = gamma_star_k(k, p)
    if min_f_k(k, p) >= 0:
        return None
    lo = optimize.brentq(lambda g: f_k_eval(g, k, p), 1e-300 + gk * 1e-12, gk, xtol=1e-15, rtol=1e-15, maxiter=500)
    hi = 2 * gk
    while f_k_eval(hi, k, p) < 0:
        hi *= 2
    up = optimize.brentq(lambda g: f_k_eval(g, k, p), gk, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return (lo, up)


@dataclass
class StabilitySets:
    strict: IntervalSet          # all f_k > 0
    weak: IntervalSet            # all f_k >= 0
    negative: dict[int, tuple[float, float]]
    certificate: str
    truncation_uncertain: bool


def _tail_probe(p: StabilityParams) -> np.ndarray:
    return np.arange(p.k_max + 1, 4 * p.k_max + 1)


def stability_sets(params: StabilityParams) -> StabilitySets:
    """Stability sets from modes ``2..k_max`` plus a tail certificate."""
    p = params
    neg = {}
    for k in range(2, p.k_max + 1):
        iv = _negative_interval(k, p)
        if iv is not None:
            neg[k] = iv
    bad = list(neg.values())
    cert, uncertain = _certify_tail(p, neg)
    if p.alpha < p.beta and p.beta < 1:
        bound = _gap_bound(p)
        if bound is not None:
            bad.append((bound, math.inf))
    strict = _complement([(lo, hi) for lo, hi in bad], strict=True)
    weak = _complement([(lo, hi) for lo, hi in bad], strict=False)
    return StabilitySets(strict, weak, neg, cert, uncertain)


def _gap_bound(p: StabilityParams) -> float | None:
    """Smallest gamma_k0 with f_j(gamma_j) < 0 and f_{j+1}(gamma_j) < 0 for all probed j >= k0.

    Every later window [gamma_j, gamma_{j+1}] then lies where f_{j+1} < 0.
    """
    ks = np.arange(2, 4 * p.k_max)
    gk = gamma_star_k(ks, p)
    ok = (min_f_k(ks, p) < 0) & (f_k_eval(gk, ks + 1, p) < 0)
    if not ok[-1]:
        return None
    bad_idx = np.nonzero(~ok)[0]
    start = 0 if bad_idx.size == 0 else bad_idx[-1] + 1
    return float(gk[start])


def _certify_tail(p: StabilityParams, neg: dict) -> tuple[str, bool]:
    a, b, n = p.alpha, p.beta, p.n
    ks = _tail_probe(p)
    if a > b or (a == b):
        # f_k >= 1 - gamma^(1+alpha) q_k and q_k -> 0
        q, r = _q(ks, p)
        if a == b:
            q = q - r
        boundary = min((lo for lo, _ in neg.values()), default=None)
        decreasing = bool(np.all(np.diff(q) <= 0))
        if boundary is None:
            if a == b and a > 1 and mu_sup(n, a) - mu_k(n, a, 1) <= p.A * b:
                return ("tail: mu_k - mu_1 <= sup mu - mu_1 <= A beta, so every f_k is non-decreasing", False)
            return ("tail: no mode below k_max goes negative; tail modes not excluded", True)
        worst = float(np.max(q)) * boundary ** (1 + a)
        if decreasing and worst < 1:
            return (f"tail: (mu_k - mu_1)/(lambda_k - lambda_1) decreasing on k in ({p.k_max}, {4 * p.k_max}], "
                    f"so f_k > 0 up to the boundary for k > k_max (margin {1 - worst:.3g})", False)
        return ("tail: could not certify modes above k_max", True)
    # alpha < beta
    mf = min_f_k(ks, p)
    if a >= 1 or b > 1:
        if np.all(mf > 0) and np.all(np.diff(mf) >= -1e-15):
            why = ("mu_k bounded" if a > 1 else "mu_k ~ log k" if a == 1 else
                   f"(mu_k - mu_1)^((1+beta)/(beta-alpha))/(lambda_k - lambda_1) ~ k^{(1 - b) * (1 + a) / (b - a):.3g}")
            return (f"tail: min f_k -> 1 ({why}); min f_k > 0 and increasing on k in ({p.k_max}, {4 * p.k_max}]", False)
        return ("tail: min f_k not yet positive and increasing on the probe window", True)
    if b < 1:
        if np.all(np.diff(mf) < 0) and mf[-1] < 0:
            return ("tail: min f_k -> -inf and f_{k+1}(gamma_k) < 0 on the probe window; "
                    "windows [gamma_k, gamma_{k+1}] are unstable for all large k", False)
        return ("tail: gap certificate not established on the probe window", True)
    # beta == 1 > alpha
    C = case_v_constant(n, a)
    lhs = p.A ** ((1 + a) / (1 - a))
    if abs(lhs - C) <= p.knife_tol * C:
        return (f"tail: A^((1+alpha)/(1-alpha)) = {lhs:.12g} equals C = {C:.12g} at tolerance; indeterminate", True)
    limit = 1 - C / lhs
    if limit > 0 and not np.all(mf > 0):
        return (f"tail: limit of min f_k is {limit:.6g} > 0 but some probed min f_k is still negative", True)
    return (f"tail: min f_k -> 1 - C/A^((1+alpha)/(1-alpha)) = {limit:.6g} (C = {C:.10g})", False)


# -------------------------------------------------------------- classifier

@dataclass
class StabilityReport:
    regime: str
    conclusion: str
    m_star_estimate: float | None
    gamma_star_estimate: float | None
    evidence: list[tuple[int, float, float]]
    truncation_certificate: str
    truncation_uncertain: bool = False
    sets: StabilitySets | None = field(default=None, repr=False)

    def to_text(self) -> str:
        lines = [
            f"regime = {self.regime}",
            f"conclusion = {self.conclusion}",
            f"gamma_star = {'' if self.gamma_star_estimate is None else f'{self.gamma_star_estimate:.12g}'}",
            f"m_star = {'' if self.m_star_estimate is None else f'{self.m_star_estimate:.12g}'}",
            f"truncation_uncertain = {str(self.truncation_uncertain).lower()}",
            f"truncation_certificate = {self.truncation_certificate}",
        ]
        if self.sets is not None:
            lines.append(f"S_strict = {self.sets.strict.describe()}")
            lines.append(f"S_weak = {self.sets.weak.describe()}")
        return "\n".join(lines) + "\n"


def _case(p: StabilityParams) -> str:
    if p.alpha > p.beta:
        return "i"
    if p.alpha == p.beta:
        return "ii"
    if p.beta > 1:
        return "iii"
    if p.beta < 1:
        return "iv"
    return "v"


def _evidence(p: StabilityParams, sets: StabilitySets) -> list[tuple[int, float, float]]:
    out = []
    for k in range(2, p.k_max + 1):
        if p.alpha < p.beta:
            out.append((k, gamma_star_k(k, p), min_f_k(k, p)))
        else:
            iv = sets.negative.get(k)
            g = iv[0] if iv else math.inf
            out.append((k, g, 0.0 if iv else 1.0))
    return out


def classify_regime(params: StabilityParams) -> StabilityReport:
    """Regime of (n, alpha, beta, A) with the threshold estimate and evidence."""
    p = params
    case = _case(p)
    sets = stability_sets(p)
    vol = ball_volume(p.n)
    strict = sets.strict
    gamma_star = None
    if case in ("i", "ii"):
        first = strict.intervals[0] if strict.intervals else None
        if first is not None and math.isinf(first[1]):
            conclusion = "every mass stable"
        else:
            gamma_star = first[1] if first else 0.0
            conclusion = "stable below m*, unstable above"
    elif case == "iii":
        last_lo = strict.intervals[-1][0] if strict.intervals else 0.0
        gamma_star = last_lo
        conclusion = "stable above m*"
    elif case == "iv":
        gamma_star = strict.intervals[-1][1] if strict.intervals else 0.0
        conclusion = "unstable above m*"
    else:
        C = case_v_constant(p.n, p.alpha)
        lhs = p.A ** ((1 + p.alpha) / (1 - p.alpha))
        if abs(lhs - C) <= p.knife_tol * C:
            conclusion = "indeterminate at tolerance: stable above m* or unstable above m*"
        elif lhs > C:
            gamma_star = strict.intervals[-1][0] if strict.intervals else 0.0
            conclusion = "stable above m* (as in (iii))"
        else:
            gb = _gap_bound(p)
            if gb is None:
                sets.truncation_uncertain = True
                sets.certificate += "; gap certificate not reached within the probe window"
            else:
                sets.strict = _complement([*sets.negative.values(), (gb, math.inf)], strict=True)
                sets.weak = _complement([*sets.negative.values(), (gb, math.inf)], strict=False)
            gamma_star = sets.strict.intervals[-1][1] if sets.strict.intervals else 0.0
            conclusion = "unstable above m* (as in (iv))"
    m_star = None if gamma_star is None or not math.isfinite(gamma_star) else vol * gamma_star ** p.n
    return StabilityReport(
        regime=REGIMES[case],
        conclusion=conclusion,
        m_star_estimate=m_star,
        gamma_star_estimate=gamma_star,
        evidence=_evidence(p, sets),
        truncation_certificate=sets.certificate,
        truncation_uncertain=sets.truncation_uncertain,
        sets=sets,
    )


def case_v_threshold(n: int, alpha: float) -> float:
    """Amplitude A_c = C^((1-alpha)/(1+alpha)) separating the two beta = 1 outcomes."""
    return case_v_constant(n, alpha) ** ((1 - alpha) / (1 + alpha))


def atlas_table(params: StabilityParams, gammas: np.ndarray, ks) -> np.ndarray:
    """Matrix of f_k(gamma) with rows over gammas and columns over ks."""
    g = np.asarray(gammas, dtype=float)[:, None]
    k = np.asarray(list(ks))[None, :]
    return f_k_eval(g, k, params)


def default_gamma_max(params: StabilityParams) -> float:
    if params.gamma_max is not None:
        return params.gamma_max
    if params.alpha < params.beta:
        return 10.0 * gamma_star_k(2, params)
    iv = _negative_interval(2, params)
    return 10.0 * (iv[0] if iv else 1.0)


def m_star_vs_A(n: int, alpha: float, beta: float, amplitudes, k_max: int = 200):
    """Rows ``(A, regime, conclusion, m_star)`` for a list of amplitudes."""
    rows = []
    for A in amplitudes:
        rep = classify_regime(StabilityParams(n, alpha, beta, float(A), k_max=k_max))
        rows.append((float(A), rep.regime, rep.conclusion, rep.m_star_estimate))
    return rows
