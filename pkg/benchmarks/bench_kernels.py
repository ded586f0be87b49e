"""Timing of the numba kernels against their numpy counterparts.

Run with ``python3 benchmarks/bench_kernels.py``. The kernel section calls
both variants directly in one process; the end-to-end section runs a short
optimisation in two subprocesses, one with ``PHASEDROP_NO_NUMBA=1``.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from phasedrop import _accel
from phasedrop.kernels import label_periodic_numba, label_periodic_numpy, solve_shift_numba, solve_shift_numpy

END_TO_END = """
import time, math
from phasedrop.grid import GridSpec
from phasedrop.energy import EnergyParams
from phasedrop.optimizer import OptimizerConfig, initialize, optimize
from phasedrop.shapes import shape_report
g = GridSpec(2, {N}, 20 * math.pi)
mask = None  # full torus: FFT energy path, shift solver on N^2 values
p = EnergyParams(alpha=1.0, epsilon=0.4 * g.h, repulsion_multiplier=1.6, kappa_W=1.0, mass=20.0)
cfg = OptimizerConfig(max_iters=400, seed=0)
optimize(initialize(g, p, cfg, mask=mask), p, OptimizerConfig(max_iters=2))  # warm-up / JIT
t = time.perf_counter()
res = optimize(initialize(g, p, cfg, mask=mask), p, cfg)
shape_report(res.field)
print(time.perf_counter() - t)
"""


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'size':>10}{'numba [ms]':>14}{'numpy [ms]':>14}{'speedup':>10}")
    for n in sizes:
        v = rng.normal(0.5, 1.0, n)
        target = 0.3 * n
        solve_shift_numba(v, target, 1e-12)  # compile
        a = best_of(lambda: solve_shift_numba(v, target, 1e-12), repeat)
        b = best_of(lambda: solve_shift_numpy(v, target, 1e-12), repeat)
        print(f"{'solve_shift':<16}{n:>10}{a * 1e3:>14.3f}{b * 1e3:>14.3f}{b / a:>10.1f}")
    for side in (int(round(np.sqrt(s))) for s in sizes):
        mask = rng.random((side, side)) < 0.45
        label_periodic_numba(mask)
        a = best_of(lambda: label_periodic_numba(mask), repeat)
        b = best_of(lambda: label_periodic_numpy(mask), repeat)
        print(f"{'label_periodic':<16}{side * side:>10}{a * 1e3:>14.3f}{b * 1e3:>14.3f}{b / a:>10.1f}")


def bench_end_to_end(N):
    times = {}
    for label, flag in (("numba", ""), ("numpy", "1")):
        env = dict(os.environ, PHASEDROP_NO_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END.format(N=N)], env=env, check=True,
                             capture_output=True, text=True)
        times[label] = float(out.stdout.strip().splitlines()[-1])
    print(f"end-to-end optimise (N={N}, 400 iterations): numba {times['numba']:.2f} s, "
          f"numpy {times['numpy']:.2f} s")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[4096, 65536, 262144])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--N", type=int, default=256)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if not _accel.use_numba():
        print("numba disabled in this process; the numba column times the plain Python loops")
    bench_kernels(args.sizes, args.repeat)
    if not args.skip_end_to_end:
        bench_end_to_end(args.N)


if __name__ == "__main__":
    main()
