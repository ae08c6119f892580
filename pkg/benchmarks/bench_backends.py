"""Timing comparison of the numba and numpy kernel backends.

Runs the two hot kernels (Euler-Maruyama batches and Brownian-supremum
scans) on identical inputs through both backends and prints a small
table with the median wall time of each and the speedup.  The first
numba call includes JIT compilation, so every kernel is warmed up once
before timing.

Usage:
    python3 benchmarks/bench_backends.py [--reps 500] [--repeats 5]
"""

import argparse
import time

import numpy as np

from smalldrift import parse
from smalldrift.backend import numba_enabled
from smalldrift.expr import compile_program
from smalldrift.kernels import bm_sup_batch, em_batch


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=500,
                    help="paths per Euler-Maruyama batch (default 500)")
    ap.add_argument("--steps", type=int, default=4000,
                    help="fine steps per path (default 4000)")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timed repetitions, median reported (default 5)")
    args = ap.parse_args()

    if not numba_enabled():
        print("numba backend is not active in this process "
              "(SMALLDRIFT_NO_NUMBA set or numba missing); nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    prog_s = compile_program(parse("-x+sin(x)"))
    prog_g = compile_program(parse("exp(-x^2)"))
    dt = np.full(args.steps, 1.0 / args.steps)
    z_em = rng.standard_normal((args.reps, args.steps))
    z_bm = rng.standard_normal((args.reps * 4, args.steps))

    cases = {
        "em_batch": lambda use: em_batch(prog_s, prog_g, 0.5, 0.1, dt, z_em,
                                         4, use_numba=use),
        "bm_sup_batch": lambda use: bm_sup_batch(z_bm, 1.0 / args.steps,
                                                 use_numba=use),
    }

    print(f"{args.reps} paths x {args.steps} steps, median of {args.repeats} runs")
    print(f"{'kernel':<14} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for name, call in cases.items():
        call(True)  # JIT warmup
        t_nb = _median_time(lambda: call(True), args.repeats)
        t_np = _median_time(lambda: call(False), args.repeats)
        print(f"{name:<14} {t_nb * 1e3:>8.1f}ms {t_np * 1e3:>8.1f}ms "
              f"{t_np / t_nb:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
