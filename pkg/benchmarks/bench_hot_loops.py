#!/usr/bin/env python3
"""Benchmark the JIT-compiled stepping loops against the numpy fallback.

Each workload runs in a fresh subprocess (the path is fixed at import time
by DIFFSPLINES_NO_NUMBA); the first in-process repetition is discarded so
the compiled path is timed warm.

Usage:
    python benchmarks/bench_hot_loops.py [--repeats 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json
import time

import numpy as np

import diffsplines as ds
from diffsplines import _accel
from diffsplines.numerics import PathField


def bench(fn, repeats):
    fn()  # warm-up (JIT compile / cache load)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def landmark_flow():
    times = ds.TimeGrid.from_step(2.0, 1e-3)
    state = ds.LandmarkState([0.25, 0.75], [15.0, -15.0])
    traj = ds.integrate_landmarks(ds.CLAMPED, state, times)
    ds.reconstruct_flow(ds.CLAMPED, traj, ds.SpatialGrid.uniform(513))


def pq_geodesic():
    grid = ds.SpatialGrid.uniform(513)
    state = ds.LandmarkState([0.25, 0.75], [15.0, -15.0])
    v0 = ds.ScalarField(grid, ds.velocity_field(ds.CLAMPED, state, grid.nodes))
    p0 = ds.initial_p_from_velocity(v0)
    q0 = ds.ScalarField(grid, np.zeros(grid.n))
    ds.integrate_geodesic(p0, q0, ds.TimeGrid.from_step(1.0, 1e-3),
                          reproject=False, drift_tol=1e-4)


def riccati_sweep():
    grid = ds.SpatialGrid.uniform(513)
    times = ds.TimeGrid.from_step(1.0, 1e-3)
    shape = (times.m + 1, grid.n)
    t = times.times[:, None]
    m = -1.2 + 0.5 * np.sin(2 * np.pi * t) + 0 * np.ones(shape)
    eta = np.full(shape, 0.8)
    prob = ds.RiccatiProblem(PathField(times, grid, eta),
                             PathField(times, grid, m),
                             boundary="terminal_zero")
    ds.riccati_solve(prob)


repeats = int(__import__("sys").argv[1])
out = {
    "path": "numba" if _accel.USE_NUMBA else "numpy",
    "landmark_flow_s": bench(landmark_flow, repeats),
    "pq_geodesic_s": bench(pq_geodesic, repeats),
    "riccati_sweep_s": bench(riccati_sweep, repeats),
}
print(json.dumps(out))
"""


def run(disable_numba: bool, repeats: int) -> dict:
    env = dict(os.environ)
    env["DIFFSPLINES_NO_NUMBA"] = "1" if disable_numba else "0"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeats)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    rows = [run(False, args.repeats), run(True, args.repeats)]
    keys = ["landmark_flow_s", "pq_geodesic_s", "riccati_sweep_s"]
    print(f"{'workload':<20s} {'numba':>10s} {'numpy':>10s} {'speedup':>9s}")
    for key in keys:
        fast = rows[0][key]
        slow = rows[1][key]
        print(f"{key[:-2]:<20s} {fast:>9.3f}s {slow:>9.3f}s {slow / fast:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
