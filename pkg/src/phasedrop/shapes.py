"""Geometric diagnostics of a converged phase field.

The field is thresholded, split into 4-connected components on the torus and
each component is compared with the ball of equal volume centred at its
(periodic) centroid.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import Field, GridSpec, ball_volume
from .kernels import label_periodic

DISK_EDGE_RATIO = 16.0 / math.pi ** 2
"""Isoperimetric ratio of a Euclidean disk measured with the edge-count perimeter.

Counting grid edges measures the l1 perimeter, which for a disk of radius r
is 8r instead of 2 pi r.
"""


class ShapeError(ValueError):
    pass


def threshold_set(f: Field, level: float = 0.5) -> np.ndarray:
    """Nodes with ``u >= level``."""
    if not 0 < level < 1:
        raise ShapeError(f"threshold level must lie in (0, 1), got {level}")
    return f.values >= level


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected (2n-neighbour) components with periodic wrap.

    Returns ``(labels, count)``; background is 0 and labels 1..count follow
    the row-major position of each component's first pixel.
    """
    return label_periodic(np.asarray(mask, dtype=bool))


def periodic_centroid(grid: GridSpec, mask: np.ndarray) -> np.ndarray:
    """Centroid of a pixel set on the torus.

    Along each axis the occupied coordinates are cut open at the largest
    empty arc, which makes the result exactly shift-equivariant for sets
    that do not wrap all the way around.
    """
    idx = np.nonzero(mask)
    if idx[0].size == 0:
        raise ShapeError("empty component has no centroid")
    T = grid.T
    coords = grid.axis_coordinates()
    out = np.empty(grid.n)
    for ax in range(grid.n):
        x = coords[idx[ax]]
        u = np.unique(x)
        gaps = np.diff(np.append(u, u[0] + T))
        start = u[(int(np.argmax(gaps)) + 1) % u.size]
        xs = start + np.mod(x - start, T)
        c = xs.mean()
        out[ax] = c - T * math.floor((c + T / 2) / T)  # into [-T/2, T/2)
    return out


def _periodic_distance2(grid: GridSpec, center: np.ndarray) -> np.ndarray:
    d2 = np.zeros(grid.shape)
    for c, x0 in zip(grid.coordinates(), center):
        d = c - x0
        d = d - grid.T * np.round(d / grid.T)
        d2 = d2 + d * d
    return d2


def _boundary(mask: np.ndarray) -> np.ndarray:
    """Pixels of ``mask`` with at least one 2n-neighbour outside (periodic)."""
    b = np.zeros_like(mask)
    for ax in range(mask.ndim):
        for s in (1, -1):
            b |= mask & ~np.roll(mask, s, axis=ax)
    return b


def edge_perimeter(grid: GridSpec, mask: np.ndarray) -> float:
    """Number of faces between the set and its complement, times h^(n-1)."""
    count = 0
    for ax in range(mask.ndim):
        count += int(np.count_nonzero(mask != np.roll(mask, 1, axis=ax)))
    return count * grid.h ** (grid.n - 1)


def ball_distance(grid: GridSpec, component: np.ndarray, slack: float | None = None) -> tuple[float, float]:
    """Symmetric difference and boundary distance to the best-fitting ball.

    The ball has the component's volume and is centred at its periodic
    centroid. ``hausdorff`` is ``max | |x - c| - r |`` over boundary pixels
    plus ``slack`` (default h, the pixel resolution).

    Returns
    -------
    sym_diff, hausdorff : float
    """
    component = np.asarray(component, dtype=bool)
    count = int(component.sum())
    if count == 0:
        raise ShapeError("ball distance of an empty component")
    h = grid.h
    vol = count * grid.cell_volume
    r = (vol / ball_volume(grid.n)) ** (1.0 / grid.n)
    c = periodic_centroid(grid, component)
    d2 = _periodic_distance2(grid, c)
    ball = d2 <= r * r
    sym = float(np.count_nonzero(ball ^ component)) * grid.cell_volume
    bd = _boundary(component)
    haus = float(np.max(np.abs(np.sqrt(d2[bd]) - r))) + (h if slack is None else slack)
    return sym, haus


@dataclass
class ComponentStats:
    id: int
    area: float
    centroid: np.ndarray
    pixel_count: int
    perimeter: float
    isoperimetric_ratio: float
    sym_diff_to_ball: float
    hausdorff_to_ball: float
    radius: float

    @property
    def centroid_radius(self) -> float:
        return float(np.linalg.norm(self.centroid))


@dataclass
class ShapeReport:
    threshold: float
    grid: GridSpec
    components: list[ComponentStats] = dc_field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.components)

    @property
    def total_area(self) -> float:
        return float(sum(c.area for c in self.components))

    @property
    def sym_diff_to_best_ball(self) -> float:
        return float(sum(c.sym_diff_to_ball for c in self.components))

    @property
    def boundary_hausdorff_to_best_ball(self) -> float:
        return max((c.hausdorff_to_ball for c in self.components), default=0.0)

    @property
    def mean_centroid_radius(self) -> float:
        if not self.components:
            return float("nan")
        return float(np.mean([c.centroid_radius for c in self.components]))

    def areas(self) -> list[float]:
        return [c.area for c in self.components]

    def to_text(self) -> str:
        lines = [
            f"threshold = {self.threshold:.17g}",
            f"components = {self.count}",
            f"total_area = {self.total_area:.17g}",
            f"sym_diff_to_best_ball = {self.sym_diff_to_best_ball:.17g}",
            f"boundary_hausdorff_to_best_ball = {self.boundary_hausdorff_to_best_ball:.17g}",
            f"mean_centroid_radius = {self.mean_centroid_radius:.17g}",
        ]
        return "\n".join(lines) + "\n"

    CSV_COLUMNS = ("id", "area", "pixel_count", "centroid", "perimeter", "isoperimetric_ratio",
                   "sym_diff_to_ball", "hausdorff_to_ball", "radius")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for c in self.components:
            w.writerow([c.id, f"{c.area:.17g}", c.pixel_count, " ".join(f"{x:.17g}" for x in c.centroid),
                        f"{c.perimeter:.17g}", f"{c.isoperimetric_ratio:.17g}", f"{c.sym_diff_to_ball:.17g}",
                        f"{c.hausdorff_to_ball:.17g}", f"{c.radius:.17g}"])
        return buf.getvalue()


def shape_report(f: Field, level: float = 0.5) -> ShapeReport:
    """Threshold, label and measure every component of ``f``."""
    g = f.grid
    mask = threshold_set(f, level)
    labels, count = connected_components(mask)
    rep = ShapeReport(level, g)
    for lab in range(1, count + 1):
        comp = labels == lab
        px = int(comp.sum())
        area = px * g.cell_volume
        per = edge_perimeter(g, comp)
        ratio = per ** 2 / (4 * math.pi * area) if g.n == 2 else float("nan")
        sym, haus = ball_distance(g, comp)
        rep.components.append(ComponentStats(
            id=lab, area=area, centroid=periodic_centroid(g, comp), pixel_count=px, perimeter=per,
            isoperimetric_ratio=ratio, sym_diff_to_ball=sym, hausdorff_to_ball=haus,
            radius=(area / ball_volume(g.n)) ** (1.0 / g.n),
        ))
    return rep
