"""Projected-gradient minimisation over the discrete feasible set.

Feasible set: ``0 <= u_j <= 1``, ``u_j = 0`` off the mask, ``h^n sum u_j = m``.
The Euclidean projection onto it is ``clip(v - tau, 0, 1)`` on the mask, with
the scalar shift ``tau`` fixed by the volume constraint.

The iteration runs on the vector of admissible nodal values only; fields are
scattered back onto the grid for traces, checkpoints and results.
"""
from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .energy import EnergyBreakdown, EnergyParams, make_model
from .grid import Field, GridSpec, ball_volume
from .io import load_pfld, save_pfld
from .kernels import solve_shift

log = logging.getLogger(__name__)

INIT_MODES = ("uniform_noise", "ball_seed", "file")
CONTINUATION_MODES = ("off", "on", "both")


class InfeasibleError(ValueError):
    """Requested mass is outside the attainable range for the mask."""


class NumericalError(RuntimeError):
    """Non-finite energy or gradient encountered during optimisation."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Solver, initialisation and multi-start settings.

    ``start_pool`` lists extra starts tried for every seed by
    :func:`multistart`: ``"noise"`` or ``"balls:k"`` (k balls of mass m/k at
    seeded random admissible nodes). ``continuation`` holds epsilon factors
    (> 1) solved in order before the target epsilon; ``continuation_mode``
    ``"both"`` runs every start with and without that schedule.
    """

    max_iters: int = 5000
    grad_tol: float = 1e-6
    vol_tol: float = 1e-10
    step0: float = 10.0
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    min_step: float = 1e-14
    seed: int = 0
    init_mode: str = "uniform_noise"
    init_file: str | None = None
    ball_center: tuple[float, ...] | None = None
    ball_count: int = 1
    noise_amplitude: float = 0.05
    restarts: int = 1
    start_pool: tuple[str, ...] = ()
    continuation: tuple[float, ...] = ()
    continuation_mode: str = "off"
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        for name in ("grad_tol", "vol_tol", "step0", "min_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("backtrack_factor", "armijo_c"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.ball_count < 1:
            raise ValueError("ball_count must be >= 1")
        for entry in self.start_pool:
            _parse_start(entry)
        if any(not c > 0 for c in self.continuation):
            raise ValueError("continuation factors must be positive")
        if self.continuation_mode not in CONTINUATION_MODES:
            raise ValueError(f"continuation_mode must be one of {CONTINUATION_MODES}")


def _parse_start(entry: str) -> tuple[str, int]:
    entry = entry.strip()
    if entry == "noise":
        return "noise", 0
    if entry.startswith("balls:"):
        try:
            k = int(entry.split(":", 1)[1])
        except ValueError:
            k = 0
        if k >= 1:
            return "balls", k
    raise ValueError(f"bad start_pool entry {entry!r} (expected 'noise' or 'balls:k')")


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    energy: EnergyBreakdown
    volume_error: float
    step: float
    projected_grad_norm: float
    wall_ms: int
    # used by the invariant checks; not part of the CSV trace
    armijo_decrease: float = 0.0
    min_value: float = 0.0
    max_value: float = 0.0


@dataclass
class OptimizeResult:
    field: Field
    trace: list[TraceRecord]
    status: str
    seed: int | None = None
    start: str = ""
    all_traces: list[list[TraceRecord]] = field(default_factory=list)
    all_starts: list[tuple[str, float, str]] = field(default_factory=list)

    @property
    def energy(self) -> EnergyBreakdown:
        return self.trace[-1].energy


def volume_range(grid: GridSpec, mask: np.ndarray) -> tuple[float, float]:
    return 0.0, grid.cell_volume * int(np.count_nonzero(mask))


def _project_vector(w: np.ndarray, target: float, tol: float) -> np.ndarray:
    if w.size == 0:
        return w.copy()
    tau = solve_shift(w, target, tol)
    return np.clip(w - tau, 0.0, 1.0)


def project_feasible(v: Field, m: float, vol_tol: float = 1e-12) -> Field:
    """Euclidean projection of ``v`` onto the feasible set with mass ``m``.

    Raises
    ------
    InfeasibleError
        If ``m`` lies outside ``[0, h^n * #mask]``.
    """
    grid = v.grid
    mask = v.effective_mask()
    lo, hi = volume_range(grid, mask)
    if not (lo <= m <= hi):
        raise InfeasibleError(f"mass {m} not attainable: feasible volumes are [{lo}, {hi}]")
    out = np.zeros(grid.shape)
    target = m / grid.cell_volume
    out[mask] = _project_vector(v.values[mask], target, vol_tol * max(target, 1e-300))
    return Field(grid, out, v.mask)


def _volume_error(x: np.ndarray, grid: GridSpec, m: float) -> float:
    return abs(float(x.sum()) * grid.cell_volume - m) / m


def smooth_ball(grid: GridSpec, volume: float, center, width: float) -> np.ndarray:
    """tanh-smoothed indicator of the ball of given volume (periodic distance)."""
    r = (volume / ball_volume(grid.n)) ** (1.0 / grid.n)
    d2 = np.zeros(grid.shape)
    for c, x0 in zip(grid.coordinates(), center):
        d = c - x0
        d = d - grid.T * np.round(d / grid.T)
        d2 = d2 + d * d
    return 0.5 * (1.0 - np.tanh((np.sqrt(d2) - r) / width))


def _random_balls(grid, mask, m, k, rng, width):
    nodes = np.argwhere(mask)
    x = grid.axis_coordinates()
    v = np.zeros(grid.shape)
    for _ in range(k):
        center = x[nodes[rng.integers(len(nodes))]]
        v += smooth_ball(grid, m / k, center, width)
    return v


def initialize(grid: GridSpec, params: EnergyParams, config: OptimizerConfig,
               mask: np.ndarray | None = None, seed: int | None = None,
               mode: str | None = None, ball_count: int | None = None,
               random_centers: bool | None = None) -> Field:
    """Feasible starting field.

    ``uniform_noise``: ``m/|Omega_h| + a*U(-1, 1)`` on the mask, projected.
    ``ball_seed``: smoothed ball of mass m at ``ball_center`` (origin by
    default); with ``ball_count > 1`` (or ``random_centers``) k balls of mass
    m/k at seeded random admissible nodes. ``file``: a PFLD field, projected.
    """
    m = params.mass
    seed = config.seed if seed is None else seed
    mode = config.init_mode if mode is None else mode
    k = config.ball_count if ball_count is None else ball_count
    eff_mask = np.ones(grid.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not eff_mask.any():
        raise InfeasibleError("mask is empty")
    rng = np.random.default_rng(seed)
    width = max(params.epsilon, grid.h)
    if mode == "uniform_noise":
        n_in = int(eff_mask.sum())
        v = np.zeros(grid.shape)
        v[eff_mask] = m / (grid.cell_volume * n_in) + config.noise_amplitude * rng.uniform(-1.0, 1.0, size=n_in)
    elif mode == "ball_seed":
        if random_centers is None:
            random_centers = k > 1
        if not random_centers:
            center = config.ball_center if config.ball_center is not None else (0.0,) * grid.n
            if len(center) != grid.n:
                raise ValueError(f"ball_center has {len(center)} components, grid dimension is {grid.n}")
            v = smooth_ball(grid, m, center, width)
        else:
            v = _random_balls(grid, eff_mask, m, k, rng, width)
        v[~eff_mask] = 0.0
    elif mode == "file":
        if not config.init_file:
            raise ValueError("init_mode=file requires init_file")
        loaded = load_pfld(config.init_file)
        if loaded.grid != grid:
            raise ValueError(f"init file grid {loaded.grid} does not match {grid}")
        v = loaded.values
    else:
        raise ValueError(f"unknown init mode {mode!r}")
    return project_feasible(Field(grid, v, mask), m, config.vol_tol)


def optimize(initial: Field, params: EnergyParams, config: OptimizerConfig, model=None,
             callback: Callable[[TraceRecord, Field], None] | None = None) -> OptimizeResult:
    """Projected gradient descent with Armijo backtracking.

    Iterates ``u_new = P(u - s * g / h^n)``. Each iteration starts from
    ``s = min(step0, 2 * previous accepted step)`` and multiplies ``s`` by
    ``backtrack_factor`` until::

        E(u_new) <= E(u) - armijo_c * <g, u - u_new>

    Stops with status ``"converged"`` once ``max|u - u_new| / s <= grad_tol``,
    ``"stationary"`` when no step above ``min_step`` is accepted, or
    ``"max_iters"``.
    """
    grid = initial.grid
    mask = initial.effective_mask()
    index = np.flatnonzero(mask.ravel())
    m = params.mass
    if model is None:
        model = make_model(grid, params, initial.mask)
    t0 = time.perf_counter()

    x = initial.values.ravel()[index].copy()
    if not initial.is_feasible() or _volume_error(x, grid, m) > config.vol_tol:
        x = project_feasible(initial, m, config.vol_tol).values.ravel()[index].copy()
    bd, g = model.evaluate_masked(x, index)
    if not (np.isfinite(bd.total) and np.all(np.isfinite(g))):
        raise NumericalError("non-finite energy or gradient at iterate 0")

    def to_field(vec):
        out = np.zeros(grid.size)
        out[index] = vec
        return Field(grid, out, initial.mask)

    def record(it, bd, step, pg, dec):
        lo = float(x.min()) if x.size else 0.0
        hi = float(x.max()) if x.size else 0.0
        if x.size < grid.size:
            lo, hi = min(lo, 0.0), max(hi, 0.0)
        return TraceRecord(it, bd, _volume_error(x, grid, m), step, pg,
                           int(round(1000 * (time.perf_counter() - t0))), dec, lo, hi)

    trace = [record(0, bd, 0.0, float("inf"), 0.0)]
    status = "max_iters"
    step = config.step0
    inv_cell = 1.0 / grid.cell_volume
    target = m * inv_cell
    tol = config.vol_tol * target

    for it in range(1, config.max_iters + 1):
        d = g * inv_cell
        s = min(config.step0, 2.0 * step)
        accepted = False
        while s >= config.min_step:
            x_new = _project_vector(x - s * d, target, tol)
            diff = x - x_new
            dec = float(g @ diff)
            bd_new, g_new = model.evaluate_masked(x_new, index)
            if not np.isfinite(bd_new.total):
                raise NumericalError(f"non-finite energy at iterate {it}")
            if bd_new.total <= bd.total - config.armijo_c * dec:
                accepted = True
                break
            s *= config.backtrack_factor
        if not accepted:
            status = "stationary"
            break
        if not np.all(np.isfinite(g_new)):
            raise NumericalError(f"non-finite gradient at iterate {it}")
        pg = float(np.max(np.abs(diff))) / s if diff.size else 0.0
        x, bd, g, step = x_new, bd_new, g_new, s
        rec = record(it, bd, s, pg, dec)
        trace.append(rec)
        if callback is not None:
            callback(rec, to_field(x))
        if config.checkpoint_every and config.checkpoint_dir and it % config.checkpoint_every == 0:
            Path(config.checkpoint_dir).mkdir(parents=True, exist_ok=True)
            save_pfld(Path(config.checkpoint_dir) / f"checkpoint_{it:07d}.pfld", to_field(x))
        if pg <= config.grad_tol:
            status = "converged"
            break
    log.debug("optimize: %s after %d iterations, E=%.10g", status, len(trace) - 1, bd.total)
    return OptimizeResult(to_field(x), trace, status)


def _solve_with_schedule(start: Field, params: EnergyParams, config: OptimizerConfig,
                         factors: Sequence[float], models: dict) -> OptimizeResult:
    f = start
    res = None
    for fac in list(factors) + [1.0]:
        p = params if fac == 1.0 else dataclasses.replace(params, epsilon=params.epsilon * fac)
        if fac not in models:
            models[fac] = make_model(start.grid, p, start.mask)
        res = optimize(f, p, config, model=models[fac])
        f = res.field
    return res


def multistart(grid: GridSpec, params: EnergyParams, config: OptimizerConfig,
               mask: np.ndarray | None = None, seeds: Sequence[int] | None = None) -> OptimizeResult:
    """Best-of-many runs of :func:`optimize`.

    For each seed (default ``config.seed + i``, ``i < restarts``) the start
    from ``init_mode`` plus every ``start_pool`` entry is solved, with or
    without the epsilon continuation according to ``continuation_mode``.
    The lowest final energy wins; ties keep the earliest start. All traces
    (final-epsilon stage only) and per-start summaries are kept.
    """
    if seeds is None:
        seeds = [config.seed + i for i in range(config.restarts)]
    if config.continuation_mode == "off" or not config.continuation:
        schedules = [()]
    elif config.continuation_mode == "on":
        schedules = [tuple(config.continuation)]
    else:
        schedules = [(), tuple(config.continuation)]
    models: dict = {}
    best = None
    traces, summaries = [], []
    run_index = 0
    for s in seeds:
        starts = [(config.init_mode, None, None)]
        for entry in config.start_pool:
            kind, k = _parse_start(entry)
            starts.append(("uniform_noise", None, None) if kind == "noise" else ("ball_seed", k, True))
        for mode, k, rand in starts:
            init = initialize(grid, params, config, mask=mask, seed=s, mode=mode, ball_count=k,
                              random_centers=rand)
            for sched in schedules:
                label = f"seed={s} start={mode}{'' if k is None else f':{k}'} continuation={','.join(map(str, sched)) or 'off'}"
                cfg = config
                if config.checkpoint_dir:
                    # one checkpoint folder per start so runs never overwrite each other
                    cfg = dataclasses.replace(config, checkpoint_dir=str(Path(config.checkpoint_dir) / f"start_{run_index:03d}"))
                run_index += 1
                res = _solve_with_schedule(init, params, cfg, sched, models)
                res.seed = s
                res.start = label
                traces.append(res.trace)
                summaries.append((label, res.energy.total, res.status))
                if best is None or res.energy.total < best.energy.total:
                    best = res
    best.all_traces = traces
    best.all_starts = summaries
    return best
