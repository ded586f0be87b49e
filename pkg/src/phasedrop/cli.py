"""Command-line entry point: ``phasedrop <subcommand> [--config FILE] [--key value ...]``.

Subcommands: run, sweep, t-table, stability, ball-energy, critical-mass.

Configuration is a flat UTF-8 ``key = value`` file ('#' starts a comment);
every key can also be given as ``--key value`` and flags override the file.
Unknown keys are rejected. Each invocation writes ``resolved_config.txt``
into its output directory.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import ball_oracle, stability
from .energy import DEFAULT_KAPPA_W, EnergyError, EnergyParams, SpectralKernel, riesz_energy
from .grid import Field, GridError, GridSpec, ball_indicator, omega_mask
from .io import PFLDError, save_pfld, save_pgm
from .optimizer import InfeasibleError, NumericalError, OptimizerConfig, multistart
from .shapes import ShapeError, shape_report

log = logging.getLogger("phasedrop")

OUTPUT_ROOT_ENV = "PHASEDROP_OUTPUT_ROOT"
SUBCOMMANDS = ("run", "sweep", "t-table", "stability", "ball-energy", "critical-mass")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ value parsing

_PI_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*(pi)?\s*$")


def parse_real(text: str) -> float:
    """Float, optionally multiplied by pi: ``2.5``, ``20pi``, ``20*pi``, ``pi``."""
    m = _PI_RE.match(text)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ValueError(f"not a number: {text!r}")
    x = float(m.group(1)) if m.group(1) is not None else 1.0
    return x * math.pi if m.group(2) else x


def _real_list(text: str) -> tuple[float, ...]:
    return tuple(parse_real(t) for t in text.split(",") if t.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return parse


def _opt_str(text: str) -> str | None:
    return text.strip() or None


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    help: str


KEYS: dict[str, Key] = {
    # grid
    "n": Key(int, 2, "spatial dimension"),
    "N": Key(int, 256, "points per axis (2048 is the full-scale setting)"),
    "T": Key(parse_real, 20 * math.pi, "box side length"),
    # energy
    "alpha": Key(parse_real, None, "Riesz exponent in (0, n) (mandatory)"),
    "beta": Key(parse_real, 1.0, "potential exponent"),
    "A": Key(parse_real, 0.0, "potential amplitude"),
    "c_m": Key(parse_real, 1.0, "multiplier of the Riesz term"),
    "mass": Key(parse_real, 1.0, "target mass"),
    "epsilon": Key(parse_real, None, "interface width (absolute); overrides epsilon_h"),
    "epsilon_h": Key(parse_real, 0.4, "interface width in units of h"),
    "kappa_W": Key(parse_real, DEFAULT_KAPPA_W, "perimeter calibration factor"),
    "omega": Key(_choice("square", "disk", "none"), "square", "support box shape"),
    "omega_size": Key(parse_real, math.pi, "square diagonal or disk diameter"),
    # optimizer
    "max_iters": Key(int, 5000, "iteration cap per solve"),
    "grad_tol": Key(parse_real, 1e-6, "projected-gradient tolerance"),
    "vol_tol": Key(parse_real, 1e-10, "relative volume tolerance"),
    "step0": Key(parse_real, 10.0, "initial step"),
    "backtrack_factor": Key(parse_real, 0.5, "Armijo backtracking factor"),
    "armijo_c": Key(parse_real, 1e-4, "Armijo constant"),
    "seed": Key(int, 0, "first RNG seed"),
    "restarts": Key(int, 1, "number of seeds"),
    "init_mode": Key(_choice("uniform_noise", "ball_seed", "file"), "uniform_noise", "initialisation"),
    "init_file": Key(_opt_str, None, "PFLD file for init_mode=file"),
    "ball_center": Key(_real_list, (), "comma-separated centre for ball_seed"),
    "ball_count": Key(int, 1, "number of seed balls"),
    "noise_amplitude": Key(parse_real, 0.05, "uniform_noise amplitude"),
    "start_pool": Key(_str_list, (), "extra starts per seed: noise, balls:k"),
    "continuation": Key(_real_list, (), "epsilon factors solved before the target"),
    "continuation_mode": Key(_choice("off", "on", "both"), "off", "use of the continuation schedule"),
    "snapshot_every": Key(int, 0, "write a PFLD snapshot every K iterations (0 = never)"),
    "threshold": Key(parse_real, 0.5, "level for shape diagnostics"),
    # sweep
    "c_m_list": Key(_real_list, (), "c_m values for sweep"),
    "mass_list": Key(_real_list, (), "masses for sweep (physical-mass mode, c_m = 1)"),
    "workers": Key(int, 1, "parallel sweep workers"),
    # tables
    "T_list": Key(_real_list, (5 * math.pi, 10 * math.pi, 20 * math.pi), "box sizes for t-table"),
    "epsilon_list": Key(_real_list, (1e-2, 1e-3, 1e-4, 1e-5, 1e-6), "regularisations for ball-energy"),
    "radius": Key(parse_real, 1.0 / math.sqrt(math.pi), "disk radius for ball-energy"),
    "k_max": Key(int, None, "mode / ball-count cutoff"),
    "gamma_max": Key(parse_real, None, "upper end of the stability gamma grid"),
    "gamma_points": Key(int, 200, "number of gamma samples in the atlas"),
    "A_list": Key(_real_list, (), "amplitudes for the m*-versus-A table"),
    # output
    "output_dir": Key(_opt_str, None, "output directory"),
    "log_level": Key(_choice("debug", "info", "warning", "error"), "info", "logging level"),
}

REQUIRED = {
    "run": ("alpha",),
    "sweep": ("alpha",),
    "t-table": ("alpha",),
    "stability": ("alpha", "beta", "A"),
    "ball-energy": ("alpha",),
    "critical-mass": ("alpha",),
}

SUBCOMMAND_DEFAULTS = {
    "t-table": {"N": 2048},
    "stability": {"k_max": 200},
    "critical-mass": {"k_max": 10},
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    """Parse ``key = value`` lines; errors name the source line.

    An empty value leaves the key at its default.
    """
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if not value:
            continue  # written for unset keys in resolved_config.txt
        try:
            out[key] = KEYS[key].parse(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return out


def _parse_flags(tokens: list[str]) -> tuple[str | None, dict[str, Any]]:
    config_path = None
    out: dict[str, Any] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        name = tok[2:]
        if "=" in name:
            name, value = name.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"flag --{name} needs a value")
            value = tokens[i + 1]
            i += 2
        if name == "config":
            config_path = value
            continue
        key = name.replace("-", "_") if name.replace("-", "_") in KEYS else name
        if key not in KEYS:
            raise ConfigError(f"unknown flag --{name}")
        try:
            out[key] = KEYS[key].parse(value)
        except ValueError as exc:
            raise ConfigError(f"--{name}: bad value: {exc}") from None
    return config_path, out


def resolve_config(subcommand: str, tokens: list[str]) -> dict[str, Any]:
    config_path, flags = _parse_flags(tokens)
    values: dict[str, Any] = {}
    if config_path is not None:
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from None
        values.update(parse_config_text(text, config_path))
    values.update(flags)
    resolved = {k: spec.default for k, spec in KEYS.items()}
    resolved.update(SUBCOMMAND_DEFAULTS.get(subcommand, {}))
    resolved.update(values)
    for key in REQUIRED[subcommand]:
        if key not in values:
            raise ConfigError(f"missing mandatory key {key!r} for {subcommand}")
    return resolved


def format_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(format_value(x) for x in v)
    return str(v)


def write_resolved(path: Path, subcommand: str, cfg: dict[str, Any]) -> None:
    lines = [f"# phasedrop {subcommand}"]
    lines += [f"{k} = {format_value(cfg[k])}" for k in KEYS]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _output_dir(cfg: dict[str, Any], subcommand: str) -> Path:
    if cfg["output_dir"]:
        out = Path(cfg["output_dir"])
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "phasedrop_output"))
        out = root / f"{subcommand}-{time.strftime('%Y%m%d-%H%M%S')}"
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------ builders

def build_grid(cfg) -> GridSpec:
    return GridSpec(cfg["n"], cfg["N"], cfg["T"])


def build_params(cfg, grid: GridSpec, c_m: float | None = None, mass: float | None = None) -> EnergyParams:
    eps = cfg["epsilon"] if cfg["epsilon"] is not None else cfg["epsilon_h"] * grid.h
    p = EnergyParams(alpha=cfg["alpha"], epsilon=eps, beta=cfg["beta"], A=cfg["A"],
                     repulsion_multiplier=cfg["c_m"] if c_m is None else c_m, kappa_W=cfg["kappa_W"],
                     mass=cfg["mass"] if mass is None else mass)
    p.check_dimension(grid.n)
    return p


def build_optimizer(cfg, checkpoint_dir: str | None = None) -> OptimizerConfig:
    return OptimizerConfig(
        max_iters=cfg["max_iters"], grad_tol=cfg["grad_tol"], vol_tol=cfg["vol_tol"], step0=cfg["step0"],
        backtrack_factor=cfg["backtrack_factor"], armijo_c=cfg["armijo_c"], seed=cfg["seed"],
        init_mode=cfg["init_mode"], init_file=cfg["init_file"],
        ball_center=tuple(cfg["ball_center"]) or None, ball_count=cfg["ball_count"],
        noise_amplitude=cfg["noise_amplitude"], restarts=cfg["restarts"], start_pool=tuple(cfg["start_pool"]),
        continuation=tuple(cfg["continuation"]), continuation_mode=cfg["continuation_mode"],
        checkpoint_every=cfg["snapshot_every"], checkpoint_dir=checkpoint_dir,
    )


TRACE_COLUMNS = ("iter", "dirichlet", "double_well", "riesz", "potential", "total",
                 "volume_error", "step", "grad_norm", "wall_ms")


def write_trace(path: Path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            e = r.energy
            w.writerow([r.iter, repr(e.dirichlet), repr(e.double_well), repr(e.riesz), repr(e.potential),
                        repr(e.total), repr(r.volume_error), repr(r.step), repr(r.projected_grad_norm), r.wall_ms])


# ------------------------------------------------------------ subcommands

def run_point(cfg: dict[str, Any], out: Path, c_m: float | None = None, mass: float | None = None) -> dict[str, Any]:
    """One minimisation with all artifacts written to ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    grid = build_grid(cfg)
    params = build_params(cfg, grid, c_m, mass)
    mask = omega_mask(grid, cfg["omega"], cfg["omega_size"])
    snap = str(out / "snapshots") if cfg["snapshot_every"] else None
    opt = build_optimizer(cfg, snap)
    res = multistart(grid, params, opt, mask=mask)
    write_trace(out / "trace.csv", res.trace)
    save_pfld(out / "final.pfld", res.field)
    if grid.n == 2:
        save_pgm(out / "final.pgm", res.field)
    rep = shape_report(res.field, cfg["threshold"])
    (out / "shape_report.csv").write_text(rep.to_csv())
    (out / "shape_report.txt").write_text(rep.to_text())
    with open(out / "starts.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("start", "total", "status"))
        for label, total, status in res.all_starts:
            w.writerow((label, repr(total), status))
    mode = "c_m" if mass is None and cfg["mass"] == 1.0 else "physical-mass"
    (out / "run_info.txt").write_text(
        f"mode = {mode}\nc_m = {params.repulsion_multiplier!r}\nmass = {params.mass!r}\n"
        f"epsilon = {params.epsilon!r}\nkappa_W = {params.kappa_W!r}\nbest_start = {res.start}\n"
        f"status = {res.status}\niterations = {res.trace[-1].iter}\n")
    e = res.energy
    return {
        "c_m": params.repulsion_multiplier, "mass": params.mass, "components": rep.count,
        "total": e.total, "dirichlet": e.dirichlet, "double_well": e.double_well, "riesz": e.riesz,
        "potential": e.potential, "sym_diff": rep.sym_diff_to_best_ball,
        "hausdorff": rep.boundary_hausdorff_to_best_ball,
        "hausdorff_rel": (rep.boundary_hausdorff_to_best_ball / max(c.radius for c in rep.components)
                          if rep.components else float("nan")),
        "mean_centroid_radius": rep.mean_centroid_radius, "status": res.status,
    }


def cmd_run(cfg, out: Path) -> None:
    summary = run_point(cfg, out)
    log.info("run: %d component(s), total energy %.10g (%s)", summary["components"], summary["total"], summary["status"])


SWEEP_COLUMNS = ("index", "c_m", "mass", "components", "total", "dirichlet", "double_well", "riesz",
                 "potential", "sym_diff", "hausdorff", "hausdorff_rel", "mean_centroid_radius", "status")


def _sweep_worker(args):
    cfg, out, c_m, mass = args
    return run_point(cfg, Path(out), c_m, mass)


def sweep_points(cfg) -> list[tuple[float | None, float | None]]:
    if cfg["c_m_list"] and cfg["mass_list"]:
        raise ConfigError("give either c_m_list or mass_list, not both")
    if cfg["c_m_list"]:
        return [(c, None) for c in cfg["c_m_list"]]
    if cfg["mass_list"]:
        return [(1.0, m) for m in cfg["mass_list"]]
    raise ConfigError("sweep needs a non-empty c_m_list or mass_list")


def transitions(rows: list[dict[str, Any]], key: str) -> list[tuple[float, float, int, int]]:
    """Consecutive sweep points where the component count changes."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if a["components"] != b["components"]:
            out.append((a[key], b[key], a["components"], b["components"]))
    return out


def cmd_sweep(cfg, out: Path) -> list[dict[str, Any]]:
    points = sweep_points(cfg)
    key = "c_m" if cfg["c_m_list"] else "mass"
    jobs = []
    for i, (c, m) in enumerate(points):
        val = c if key == "c_m" else m
        jobs.append((cfg, str(out / f"point_{i:03d}_{key}_{val:.6g}"), c, m))
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            rows = list(pool.map(_sweep_worker, jobs))
    else:
        rows = [_sweep_worker(j) for j in jobs]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for i, r in enumerate(rows):
            w.writerow([i] + [r[c] if isinstance(r[c], (int, str)) else repr(float(r[c])) for c in SWEEP_COLUMNS[1:]])
    tr = transitions(rows, key)
    lines = [f"{key} in ({a!r}, {b!r}): components {ca} -> {cb}" for a, b, ca, cb in tr] or ["no transition"]
    (out / "transitions.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        log.info("sweep: %s", line)
    return rows


def t_table_rows(alpha: float, N: int, T_values, n: int = 2) -> list[tuple[float, int, float]]:
    """Relative error of the spectral Riesz energy of the sampled unit-area disk."""
    v_exact = ball_oracle.ball_riesz_exact(alpha, ball_oracle.unit_area_radius(n))
    rows = []
    for T in T_values:
        grid = GridSpec(n, N, T)
        f = Field(grid, ball_indicator(grid, 1.0))
        v = riesz_energy(f, SpectralKernel.build(grid, alpha))
        rows.append((T, N, (v - v_exact) / v_exact))
    return rows


def cmd_t_table(cfg, out: Path) -> None:
    rows = t_table_rows(cfg["alpha"], cfg["N"], cfg["T_list"], cfg["n"])
    with open(out / "t_table.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("T", "N", "relative_error"))
        for T, N, err in rows:
            w.writerow((repr(T), N, repr(err)))
            log.info("t-table: T=%.6g N=%d relative error %.5f", T, N, err)


def cmd_ball_energy(cfg, out: Path) -> None:
    alpha, R = cfg["alpha"], cfg["radius"]
    exact = ball_oracle.ball_riesz_exact(alpha, R)
    with open(out / "ball_energy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epsilon", "V_eps", "V", "V_minus_V_eps", "bound_unit_area"))
        for eps in cfg["epsilon_list"]:
            v = ball_oracle.ball_riesz_regularized(2, alpha, R, ball_oracle.QuadratureSpec(eps))
            w.writerow((repr(eps), repr(v), repr(exact), repr(exact - v),
                        repr(ball_oracle.regularization_error_bound(2, alpha, eps))))
    log.info("ball-energy: V = %.15g for radius %.6g", exact, R)


def cmd_critical_mass(cfg, out: Path) -> None:
    n, alpha = cfg["n"], cfg["alpha"]
    if n != 2:
        raise ConfigError("critical-mass uses the disk quadrature and needs n = 2")
    v_unit = ball_oracle.unit_disk_energy(alpha)
    with open(out / "critical_mass.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("k", "m_k", "c_m"))
        for k, mk, cm in ball_oracle.critical_mass_table(cfg["k_max"], n, alpha, v_unit):
            w.writerow((k, repr(mk), repr(cm)))


def cmd_stability(cfg, out: Path) -> None:
    p = stability.StabilityParams(cfg["n"], cfg["alpha"], cfg["beta"], cfg["A"], k_max=cfg["k_max"],
                                  gamma_max=cfg["gamma_max"])
    rep = stability.classify_regime(p)
    (out / "stability_report.txt").write_text(rep.to_text())
    gmax = stability.default_gamma_max(p)
    gammas = np.linspace(gmax / cfg["gamma_points"], gmax, cfg["gamma_points"])
    ks = range(2, p.k_max + 1)
    table = stability.atlas_table(p, gammas, ks)
    with open(out / "atlas.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gamma"] + [f"f_{k}" for k in ks])
        for g, row in zip(gammas, table):
            w.writerow([repr(float(g))] + [repr(float(x)) for x in row])
    with open(out / "evidence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("k", "gamma_k", "f_k_at_gamma_k"))
        for k, g, v in rep.evidence:
            w.writerow((k, repr(g), repr(v)))
    if cfg["A_list"]:
        with open(out / "m_star_vs_A.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("A", "regime", "conclusion", "m_star"))
            for A, regime, concl, m in stability.m_star_vs_A(p.n, p.alpha, p.beta, cfg["A_list"], p.k_max):
                w.writerow((repr(A), regime, concl, "" if m is None else repr(m)))
    log.info("stability: %s, %s", rep.regime, rep.conclusion)


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "t-table": cmd_t_table,
    "stability": cmd_stability,
    "ball-energy": cmd_ball_energy,
    "critical-mass": cmd_critical_mass,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="phasedrop", description=__doc__.split("\n\n")[0],
                                     epilog="Keys: " + ", ".join(KEYS))
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    args, rest = parser.parse_known_args(argv)
    try:
        cfg = resolve_config(args.subcommand, rest)
    except ConfigError as exc:
        print(f"phasedrop: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=cfg["log_level"].upper(), format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        out = _output_dir(cfg, args.subcommand)
        write_resolved(out / "resolved_config.txt", args.subcommand, cfg)
    except OSError as exc:
        print(f"phasedrop: cannot write output directory: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        COMMANDS[args.subcommand](cfg, out)
    except (ConfigError, EnergyError, GridError, InfeasibleError, stability.StabilityDomainError,
            ball_oracle.UnsupportedDimension) as exc:
        print(f"phasedrop: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ball_oracle.QuadratureError, ShapeError, FloatingPointError) as exc:
        print(f"phasedrop: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, PFLDError) as exc:
        print(f"phasedrop: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"phasedrop: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(out)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
