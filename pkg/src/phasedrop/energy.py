"""Discrete relaxed liquid-drop energy and its exact nodal gradient.

The energy of a nodal field ``u`` on the periodic grid is::

    kappa_W * (eps * D(u) + W_N(u) / eps) + c_m * V_T(u) + U_N(u)

with

* ``D(u)   = (1/T^n) sum_k |2 pi k / T|^2 |c_k|^2``  (spectral Dirichlet energy)
* ``W_N(u) = h^n sum_j u_j (1 - u_j)``
* ``V_T(u) = (C(n, a) / T^n) sum_{k != 0} |2 pi k / T|^(-a) |c_k|^2``
* ``U_N(u) = A h^n sum_j u_j |x_j|^beta``

All spectral sums use the real-to-complex half spectrum internally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.special import gamma

from .grid import Field, GridError, GridSpec

DEFAULT_KAPPA_W = 4.0 / np.pi


class EnergyError(ValueError):
    pass


def riesz_constant(n: int, alpha: float) -> float:
    """C(n, alpha) = 2^alpha pi^(n/2) Gamma(alpha/2) / Gamma((n - alpha)/2)."""
    return float(2.0 ** alpha * np.pi ** (n / 2) * gamma(alpha / 2) / gamma((n - alpha) / 2))


@dataclass(frozen=True)
class EnergyParams:
    alpha: float
    epsilon: float
    beta: float = 1.0
    A: float = 0.0
    repulsion_multiplier: float = 1.0
    kappa_W: float = DEFAULT_KAPPA_W
    mass: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise EnergyError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise EnergyError(f"beta must be positive, got {self.beta}")
        if not self.A >= 0:
            raise EnergyError(f"A must be >= 0, got {self.A}")
        if not self.epsilon > 0:
            raise EnergyError(f"epsilon must be positive, got {self.epsilon}")
        if not self.repulsion_multiplier >= 0:
            raise EnergyError(f"repulsion multiplier must be >= 0, got {self.repulsion_multiplier}")
        if not self.kappa_W > 0:
            raise EnergyError(f"kappa_W must be positive, got {self.kappa_W}")
        if not self.mass > 0:
            raise EnergyError(f"mass must be positive, got {self.mass}")

    def check_dimension(self, n: int) -> None:
        if not self.alpha < n:
            raise EnergyError(f"alpha={self.alpha} must lie in (0, n={n})")


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy terms as they enter the total.

    ``dirichlet`` is ``eps * D(u)`` and ``double_well`` is ``W_N(u) / eps``;
    ``riesz`` is ``V_T(u)`` before the multiplier ``c_m``.
    """

    dirichlet: float
    double_well: float
    riesz: float
    potential: float
    total: float


def _half_spectrum(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sfft.rfftn(values) * grid.cell_volume


def _multiplicity(grid: GridSpec) -> np.ndarray:
    # modes 1..N/2-1 of the last axis stand for themselves and their mirror
    m = np.full(grid.N // 2 + 1, 2.0)
    m[0] = 1.0
    m[-1] = 1.0
    shape = [1] * grid.n
    shape[-1] = m.size
    return m.reshape(shape)


def _frequency_norm(grid: GridSpec) -> np.ndarray:
    ks = grid.wavenumbers_rfft()
    k2 = np.zeros([k.shape[ax] for ax, k in enumerate(ks)])
    for k in ks:
        k2 = k2 + k * k
    return (2.0 * np.pi / grid.T) * np.sqrt(k2)


def _weighted_sum(c: np.ndarray, weights: np.ndarray, mult: np.ndarray) -> float:
    return float(np.sum(mult * weights * (c.real ** 2 + c.imag ** 2)))


def _inverse(grid: GridSpec, spec: np.ndarray) -> np.ndarray:
    # real field g_j = Re sum_k spec_k exp(+2i pi k.j/N), given the half spectrum
    return sfft.irfftn(spec, s=grid.shape, axes=tuple(range(grid.n))) * grid.size


@dataclass(frozen=True)
class SpectralKernel:
    """Riesz weights ``|2 pi k/T|^(-alpha)`` (zero at k = 0) on the half spectrum."""

    grid: GridSpec
    alpha: float
    weights: np.ndarray = field(repr=False)
    riesz_constant: float
    multiplicity: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, grid: GridSpec, alpha: float) -> "SpectralKernel":
        if not 0 < alpha < grid.n:
            raise EnergyError(f"alpha={alpha} must lie in (0, n={grid.n})")
        kn = _frequency_norm(grid)
        w = np.zeros_like(kn)
        nz = kn > 0
        w[nz] = kn[nz] ** (-alpha)
        w.setflags(write=False)
        mult = _multiplicity(grid)
        mult.setflags(write=False)
        return cls(grid, float(alpha), w, riesz_constant(grid.n, alpha), mult)

    def full_weights(self) -> np.ndarray:
        """Weights on the full FFT-ordered frequency grid."""
        ks = self.grid.wavenumbers()
        k2 = sum(k * k for k in ks)
        kn = (2.0 * np.pi / self.grid.T) * np.sqrt(k2)
        w = np.zeros_like(kn)
        w[kn > 0] = kn[kn > 0] ** (-self.alpha)
        return w


def _check_grid(f: Field, grid: GridSpec) -> None:
    if f.grid != grid:
        raise GridError(f"field grid {f.grid} does not match kernel grid {grid}")


def riesz_energy(f: Field, kernel: SpectralKernel) -> float:
    _check_grid(f, kernel.grid)
    g = kernel.grid
    c = _half_spectrum(f.values, g)
    return kernel.riesz_constant / g.T ** g.n * _weighted_sum(c, kernel.weights, kernel.multiplicity)


def riesz_gradient(f: Field, kernel: SpectralKernel) -> Field:
    _check_grid(f, kernel.grid)
    g = kernel.grid
    c = _half_spectrum(f.values, g)
    scale = 2.0 * g.cell_volume * kernel.riesz_constant / g.T ** g.n
    return f.with_values(scale * _inverse(g, kernel.weights * c))


def dirichlet_energy(f: Field) -> float:
    """Spectral ``int |grad u|^2`` over the torus."""
    g = f.grid
    c = _half_spectrum(f.values, g)
    kn = _frequency_norm(g)
    return _weighted_sum(c, kn * kn, _multiplicity(g)) / g.T ** g.n


def dirichlet_gradient(f: Field) -> Field:
    g = f.grid
    c = _half_spectrum(f.values, g)
    kn = _frequency_norm(g)
    scale = 2.0 * g.cell_volume / g.T ** g.n
    return f.with_values(scale * _inverse(g, kn * kn * c))


def double_well_energy(f: Field) -> float:
    u = f.values
    return f.grid.cell_volume * float(np.sum(u * (1.0 - u)))


def double_well_gradient(f: Field) -> Field:
    return f.with_values(f.grid.cell_volume * (1.0 - 2.0 * f.values))


def potential_weights(grid: GridSpec, beta: float, A: float) -> np.ndarray:
    """Nodal gradient of the confining term: ``A h^n |x_j|^beta``."""
    return A * grid.cell_volume * grid.radius() ** beta


def potential_energy(f: Field, params: EnergyParams) -> float:
    if params.A == 0.0:
        return 0.0
    return float(np.sum(f.values * potential_weights(f.grid, params.beta, params.A)))


def potential_gradient(f: Field, params: EnergyParams) -> Field:
    return f.with_values(potential_weights(f.grid, params.beta, params.A))


class EnergyModel:
    """Precomputed evaluator of the total energy and gradient on one grid.

    One forward and one inverse real FFT per call to :meth:`evaluate`.
    """

    def __init__(self, grid: GridSpec, params: EnergyParams, kernel: SpectralKernel | None = None):
        params.check_dimension(grid.n)
        if kernel is None:
            kernel = SpectralKernel.build(grid, params.alpha)
        if kernel.grid != grid or kernel.alpha != params.alpha:
            raise GridError("kernel does not match grid/alpha")
        self.grid = grid
        self.params = params
        self.kernel = kernel
        kn = _frequency_norm(grid)
        self._k2 = kn * kn
        self._mult = kernel.multiplicity
        self._riesz_scale = kernel.riesz_constant / grid.T ** grid.n
        self._dir_scale = 1.0 / grid.T ** grid.n
        p = params
        # combined multiplier for the gradient of all spectral terms
        self._gmult = (2.0 * grid.cell_volume / grid.T ** grid.n) * (
            p.kappa_W * p.epsilon * self._k2 + p.repulsion_multiplier * kernel.riesz_constant * kernel.weights
        )
        self._pot = potential_weights(grid, p.beta, p.A) if p.A > 0 else None

    def breakdown(self, values: np.ndarray) -> EnergyBreakdown:
        return self._evaluate(values, want_grad=False)[0]

    def evaluate(self, values: np.ndarray) -> tuple[EnergyBreakdown, np.ndarray]:
        return self._evaluate(values, want_grad=True)

    def _evaluate(self, values, want_grad):
        g, p = self.grid, self.params
        c = _half_spectrum(values, g)
        power = self._mult * (c.real ** 2 + c.imag ** 2)
        dirichlet = p.epsilon * self._dir_scale * float(np.sum(self._k2 * power))
        riesz = self._riesz_scale * float(np.sum(self.kernel.weights * power))
        well = g.cell_volume * float(np.sum(values * (1.0 - values))) / p.epsilon
        pot = float(np.sum(values * self._pot)) if self._pot is not None else 0.0
        total = p.kappa_W * (dirichlet + well) + p.repulsion_multiplier * riesz + pot
        bd = EnergyBreakdown(dirichlet, well, riesz, pot, total)
        if not want_grad:
            return bd, None
        grad = _inverse(g, self._gmult * c)
        grad += (p.kappa_W * g.cell_volume / p.epsilon) * (1.0 - 2.0 * values)
        if self._pot is not None:
            grad += self._pot
        return bd, grad

    def evaluate_masked(self, x: np.ndarray, index: np.ndarray) -> tuple[EnergyBreakdown, np.ndarray]:
        """Energy and gradient for a field supported on flat node ``index``."""
        u = np.zeros(self.grid.size)
        u[index] = x
        bd, g = self.evaluate(u.reshape(self.grid.shape))
        return bd, g.ravel()[index]


class MaskedEnergyModel:
    """Same energy as :class:`EnergyModel` for fields supported on a mask.

    The spectral quadratic forms are restricted to the ``n_mask`` admissible
    nodes as dense matrices ``Q_ab = (h^2n / T^n) sum_k M_k exp(2i pi k.(j_a - j_b)/N)``,
    so each evaluation costs two ``n_mask x n_mask`` matvecs instead of two
    full-grid FFTs. Exact up to rounding; worthwhile for small masks.
    """

    def __init__(self, grid: GridSpec, params: EnergyParams, mask: np.ndarray,
                 kernel: SpectralKernel | None = None):
        params.check_dimension(grid.n)
        if kernel is None:
            kernel = SpectralKernel.build(grid, params.alpha)
        self.grid = grid
        self.params = params
        self.kernel = kernel
        self.index = np.flatnonzero(np.asarray(mask, dtype=bool).ravel())
        kn = _frequency_norm(grid)
        scale = grid.cell_volume ** 2 / grid.T ** grid.n
        # real-space periodic kernels evaluated at integer offsets
        kd = _inverse(grid, kn * kn + 0j) * scale
        kr = _inverse(grid, kernel.weights + 0j) * (scale * kernel.riesz_constant)
        sub = np.array(np.unravel_index(self.index, grid.shape))
        offs = [(sub[ax][:, None] - sub[ax][None, :]) % grid.N for ax in range(grid.n)]
        self._qd = kd[tuple(offs)]
        self._qr = kr[tuple(offs)]
        self._cell = grid.cell_volume
        self._pot = potential_weights(grid, params.beta, params.A).ravel()[self.index] if params.A > 0 else None

    def evaluate_masked(self, x: np.ndarray, index: np.ndarray | None = None) -> tuple[EnergyBreakdown, np.ndarray]:
        p = self.params
        gd = self._qd @ x
        gr = self._qr @ x
        dirichlet = p.epsilon * float(x @ gd)
        riesz = float(x @ gr)
        well = self._cell * float(np.sum(x * (1.0 - x))) / p.epsilon
        pot = float(x @ self._pot) if self._pot is not None else 0.0
        total = p.kappa_W * (dirichlet + well) + p.repulsion_multiplier * riesz + pot
        grad = 2.0 * (p.kappa_W * p.epsilon * gd + p.repulsion_multiplier * gr)
        grad += (p.kappa_W * self._cell / p.epsilon) * (1.0 - 2.0 * x)
        if self._pot is not None:
            grad += self._pot
        return EnergyBreakdown(dirichlet, well, riesz, pot, total), grad


DENSE_MASK_LIMIT = 3000


def make_model(grid: GridSpec, params: EnergyParams, mask: np.ndarray | None = None,
               dense_limit: int = DENSE_MASK_LIMIT):
    """Pick the masked dense evaluator for small masks, the FFT one otherwise."""
    if mask is not None and 0 < int(np.count_nonzero(mask)) <= dense_limit:
        return MaskedEnergyModel(grid, params, mask)
    return EnergyModel(grid, params)


def total_energy(f: Field, params: EnergyParams, kernel: SpectralKernel | None = None) -> EnergyBreakdown:
    return EnergyModel(f.grid, params, kernel).breakdown(f.values)


def total_gradient(f: Field, params: EnergyParams, kernel: SpectralKernel | None = None) -> Field:
    return f.with_values(EnergyModel(f.grid, params, kernel).evaluate(f.values)[1])
