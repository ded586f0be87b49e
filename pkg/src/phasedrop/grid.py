"""Periodic grids, sampled fields and the discrete Fourier convention.

Nodes sit at ``x_j = j*T/N`` for ``j`` in ``{-N/2+1, ..., N/2}`` along every
axis. Arrays are stored row-major with axis index ``j`` at storage position
``j + N/2 - 1``, so storage position 0 is the node ``-T/2 + h``.

Fourier coefficients use the Riemann-sum form of the torus integral::

    c_k = h**n * sum_j u_j * exp(-2i*pi*k.j/N),    h = T/N

which is exact for trigonometric polynomials with frequencies in the same
index set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft


class GridError(ValueError):
    """Structural mismatch between a grid and the data attached to it."""


@dataclass(frozen=True)
class GridSpec:
    """Periodic box ``[-T/2, T/2]^n`` sampled with ``N`` points per axis."""

    n: int
    N: int
    T: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise GridError(f"dimension n must be a positive integer, got {self.n!r}")
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise GridError(f"N must be an even integer >= 4, got {self.N!r}")
        if not np.isfinite(self.T) or self.T <= 0:
            raise GridError(f"T must be positive, got {self.T!r}")

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def size(self) -> int:
        return self.N ** self.n

    def axis_indices(self) -> np.ndarray:
        """Integer node indices ``-N/2+1 .. N/2`` in storage order."""
        return np.arange(-self.N // 2 + 1, self.N // 2 + 1)

    def axis_coordinates(self) -> np.ndarray:
        return self.axis_indices() * self.h

    def coordinates(self) -> list[np.ndarray]:
        """Broadcastable (open mesh) coordinate arrays, one per axis."""
        x = self.axis_coordinates()
        out = []
        for ax in range(self.n):
            shape = [1] * self.n
            shape[ax] = self.N
            out.append(x.reshape(shape))
        return out

    def radius(self) -> np.ndarray:
        """|x_j| on the full grid."""
        r2 = np.zeros(self.shape)
        for c in self.coordinates():
            r2 = r2 + c * c
        return np.sqrt(r2)

    def wavenumbers(self) -> list[np.ndarray]:
        """Integer frequencies in FFT order, as an open mesh."""
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        out = []
        for ax in range(self.n):
            shape = [1] * self.n
            shape[ax] = self.N
            out.append(k.reshape(shape))
        return out

    def wavenumbers_rfft(self) -> list[np.ndarray]:
        """Integer frequencies for the ``rfftn`` half-spectrum layout."""
        out = self.wavenumbers()
        kr = np.fft.rfftfreq(self.N, 1.0 / self.N)
        shape = [1] * self.n
        shape[-1] = kr.size
        out[-1] = kr.reshape(shape)
        return out


@dataclass
class Field:
    """Real nodal values on a grid plus the support mask of Omega.

    ``mask=None`` means every node is admissible.
    """

    grid: GridSpec
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.size != self.grid.size:
            raise GridError(f"field has {values.size} values, grid expects N^n = {self.grid.size}")
        self.values = values.reshape(self.grid.shape)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.size != self.grid.size:
                raise GridError(f"mask has {mask.size} entries, grid expects {self.grid.size}")
            self.mask = mask.reshape(self.grid.shape)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values, self.mask)

    def effective_mask(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.grid.shape, dtype=bool)
        return self.mask

    def mass(self) -> float:
        return float(self.values.sum()) * self.grid.cell_volume

    def is_feasible(self, tol: float = 1e-12) -> bool:
        v = self.values
        if not np.all(np.isfinite(v)):
            return False
        if v.min() < -tol or v.max() > 1.0 + tol:
            return False
        if self.mask is not None and np.any(v[~self.mask] != 0.0):
            return False
        return True


@dataclass
class Spectrum:
    """Coefficients ``c_k`` indexed by ``k`` in ``{-N/2+1..N/2}^n`` (storage order)."""

    grid: GridSpec
    coeffs: np.ndarray
    convention: str = field(default="c_k = h^n sum_j u_j exp(-2i pi k.j/N)")

    def coefficient(self, k: Sequence[int]) -> complex:
        idx = tuple(int(ki) + self.grid.N // 2 - 1 for ki in k)
        return complex(self.coeffs[idx])


def _to_fft_order(a: np.ndarray, N: int) -> np.ndarray:
    return np.roll(a, -(N // 2 - 1), axis=tuple(range(a.ndim)))


def _from_fft_order(a: np.ndarray, N: int) -> np.ndarray:
    return np.roll(a, N // 2 - 1, axis=tuple(range(a.ndim)))


def analyze(f: Field) -> Spectrum:
    """Fourier coefficients of a sampled field (Riemann-sum convention)."""
    g = f.grid
    if f.values.shape != g.shape:
        raise GridError(f"values shape {f.values.shape} does not match grid {g.shape}")
    c = sfft.fftn(_to_fft_order(f.values, g.N)) * g.cell_volume
    return Spectrum(g, _from_fft_order(c, g.N))


def conjugate_asymmetry(s: Spectrum) -> float:
    """max |c_{-k} - conj(c_k)| with indices taken mod N."""
    c = _to_fft_order(s.coeffs, s.grid.N)
    flipped = c
    for ax in range(c.ndim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return float(np.max(np.abs(flipped - np.conj(c)))) if c.size else 0.0


def synthesize(s: Spectrum, sym_tol: float = 1e-9) -> Field:
    """Inverse of :func:`analyze`; requires conjugate-symmetric coefficients.

    Raises
    ------
    GridError
        If ``max|c_{-k} - conj(c_k)|`` exceeds ``sym_tol`` times the largest
        coefficient magnitude; the message carries the violation size.
    """
    g = s.grid
    if s.coeffs.shape != g.shape:
        raise GridError(f"coefficient shape {s.coeffs.shape} does not match grid {g.shape}")
    scale = float(np.max(np.abs(s.coeffs))) if s.coeffs.size else 0.0
    asym = conjugate_asymmetry(s)
    if asym > sym_tol * max(scale, 1e-300) and asym > 0.0:
        raise GridError(f"spectrum is not conjugate-symmetric: violation {asym:.3e} (scale {scale:.3e})")
    u = sfft.ifftn(_to_fft_order(s.coeffs, g.N)).real / g.cell_volume
    return Field(g, _from_fft_order(u, g.N))


def node_coordinates(grid: GridSpec, j: Sequence[int]) -> np.ndarray:
    """Position ``j*T/N`` of the node with multi-index ``j``."""
    j = np.asarray(j, dtype=np.int64).reshape(-1)
    if j.size != grid.n:
        raise GridError(f"index has {j.size} components, grid dimension is {grid.n}")
    lo, hi = -grid.N // 2 + 1, grid.N // 2
    if np.any(j < lo) or np.any(j > hi):
        raise GridError(f"index {tuple(j)} outside {{{lo}..{hi}}}^{grid.n}")
    return j * grid.h


def omega_mask(grid: GridSpec, shape: str = "square", size: float = np.pi) -> np.ndarray:
    """Nodes inside the support box Omega, centred at the origin.

    ``square`` takes ``size`` as the diagonal of an axis-aligned cube,
    ``disk`` as the diameter of a ball, ``none`` admits every node.
    """
    if shape == "none":
        return np.ones(grid.shape, dtype=bool)
    if shape == "square":
        half = 0.5 * size / np.sqrt(grid.n)
        inside = np.ones(grid.shape, dtype=bool)
        for c in grid.coordinates():
            inside = inside & (np.abs(c) <= half)
        return inside
    if shape == "disk":
        return grid.radius() <= 0.5 * size
    raise GridError(f"unknown Omega shape {shape!r} (expected square, disk or none)")


def ball_volume(n: int) -> float:
    """Volume |B| of the unit ball in R^n."""
    from scipy.special import gamma
    return float(np.pi ** (n / 2) / gamma(n / 2 + 1))


def ball_indicator(grid: GridSpec, volume: float, center: Sequence[float] | None = None) -> np.ndarray:
    """Sharp sampled indicator of the ball of given volume (nodes with |x-c| <= r)."""
    r = (volume / ball_volume(grid.n)) ** (1.0 / grid.n)
    center = np.zeros(grid.n) if center is None else np.asarray(center, dtype=float)
    d2 = np.zeros(grid.shape)
    for c, x0 in zip(grid.coordinates(), center):
        d = c - x0
        d = d - grid.T * np.round(d / grid.T)
        d2 = d2 + d * d
    return (d2 <= r * r).astype(np.float64)
