#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy twin.

Times the channel forward model and the Gauss-Newton refinement in
isolation, then a full Monte Carlo validation cell end to end under each
backend (separate processes, since the backend is chosen at import).

Usage: python benchmarks/bench_backends.py [--trials 500]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from miisac import CarrierSpec, CoilSpec, LinkGeometry, channel_matrix, coil_constant
from miisac import _kernels_py

try:
    from miisac import _kernels
except ImportError:
    _kernels = None

COIL = CoilSpec(0.15, 20)
CARRIER = CarrierSpec(10e3, 1e3)

_CELL_SNIPPET = """
import time
from miisac import CarrierSpec, CoilSpec, FrameSpec, run_crb_validation
from miisac.backend import BACKEND_NAME
t0 = time.perf_counter()
run_crb_validation(CoilSpec(0.15, 20), CarrierSpec(10e3, 1e3), FrameSpec(100, 1.0),
                   [10.0], trials={trials}, base_seed=7,
                   profiles=(("ideal", 0.0, 0.0),), threads=1)
print(f"{{BACKEND_NAME}} {{time.perf_counter() - t0:.3f}}")
"""


def _time(fn, n):
    t0 = time.perf_counter()
    for _ in range(n):
        fn()
    return (time.perf_counter() - t0) / n


def bench_kernels():
    rng = np.random.default_rng(0)
    c = coil_constant(COIL, CARRIER)
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    rt = q * np.sign(np.diag(r))
    if np.linalg.det(rt) < 0:
        rt[:, 2] = -rt[:, 2]
    rr = np.eye(3)
    geom = LinkGeometry(10.0, 0.8, 1.2, rt, rr)
    h = channel_matrix(geom, COIL, CARRIER).entries.real.ravel()
    target = h + 1e-5 * np.linalg.norm(h) * rng.standard_normal(9)
    args = (10.3, 0.82, 1.18, c, rt, rr)

    impls = [("python", _kernels_py)] + ([("compiled", _kernels)] if _kernels else [])
    results = {}
    for name, impl in impls:
        t_fwd = _time(lambda: impl.channel_real(10.0, 0.8, 1.2, c, rt, rr), 20_000)
        t_gn = _time(lambda: impl.gn_refine(target, *args), 2_000)
        results[name] = (t_fwd, t_gn)
        print(f"{name:>9}: channel eval {t_fwd * 1e6:8.2f} us   gn_refine {t_gn * 1e6:8.2f} us")
    if "compiled" in results:
        sf = results["python"][0] / results["compiled"][0]
        sg = results["python"][1] / results["compiled"][1]
        print(f"{'speedup':>9}: channel eval {sf:8.1f} x    gn_refine {sg:8.1f} x")


def bench_cell(trials):
    print(f"\nfull validation cell ({trials} trials of 100-symbol frames, 1 thread):")
    for backend in ("python", "compiled") if _kernels else ("python",):
        env = dict(os.environ, MI_ISAC_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, "-c", _CELL_SNIPPET.format(trials=trials)],
            env=env, capture_output=True, text=True,
        )
        if out.returncode:
            print(f"{backend:>9}: failed\n{out.stderr}")
        else:
            name, seconds = out.stdout.split()
            print(f"{name:>9}: {float(seconds):.3f} s")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=1000)
    args = parser.parse_args()
    if _kernels is None:
        print("compiled kernels not available; benchmarking the fallback only")
    bench_kernels()
    bench_cell(args.trials)


if __name__ == "__main__":
    main()
