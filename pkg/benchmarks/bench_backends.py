"""Compare the numba and numpy backends on the sampler's hot paths.

Usage::

    python benchmarks/bench_backends.py [--iters 2000] [--repeats 3]

Reports the median wall time per chain sweep and per full PD-SIR proposal
for the reference scenario (S(0) = 1000, 746 infections, 10 intervals)
and the population-scale stand-in (S(0) = 291995, 410 infections, 73
intervals). The first call of each numba kernel is excluded (compilation).
"""

from __future__ import annotations

import argparse
import statistics
import time
from importlib.resources import files

import numpy as np

from pdsir._backend import NUMBA_AVAILABLE
from pdsir.io import load_incidence_csv
from pdsir.mcmc import McmcConfig, run_chain
from pdsir.model import IncidenceCounts, ObservationGrid, Params
from pdsir.proposal import propose_full

REFERENCE_COUNTS = (12, 13, 21, 46, 91, 127, 156, 151, 88, 41)


def _scenarios():
    grid, y = load_incidence_csv(files("pdsir") / "data" / "ebola_standin_73wk.csv")
    return [
        ("reference", IncidenceCounts(np.array(REFERENCE_COUNTS)), ObservationGrid.uniform(6.0, 10),
         1000, 10, Params(0.00225, 1.0, 2.0), 0.2),
        ("stand-in", y, grid, 291995, 5, Params(3.8e-7, 0.0097, 2.0), 0.1),
    ]


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=2000, help="sweeps per timed chain")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["numba", "numpy"] if NUMBA_AVAILABLE else ["numpy"]

    print(f"{'scenario':<10} {'backend':<7} {'sweep (ms)':>11} {'proposal (ms)':>14}")
    for name, y, grid, s0, i0, params, rho in _scenarios():
        per = {}
        for backend in backends:
            cfg = McmcConfig(iterations=args.iters, rho=rho, seed=0, init_params=params, backend=backend)
            run_chain(y, grid, s0, i0, McmcConfig(iterations=2, init_params=params, backend=backend))  # warm-up
            sweep = _median_time(lambda: run_chain(y, grid, s0, i0, cfg), args.repeats) / args.iters
            rng = np.random.default_rng(0)
            n_prop = max(10, args.iters // 10)
            prop = _median_time(lambda: [propose_full(y, grid, params, i0, rng, s0=s0, backend=backend)
                                         for _ in range(n_prop)], args.repeats) / n_prop
            per[backend] = sweep
            print(f"{name:<10} {backend:<7} {1e3 * sweep:>11.3f} {1e3 * prop:>14.3f}")
        if len(per) == 2:
            print(f"{name:<10} numba speed-up per sweep: {per['numpy'] / per['numba']:.1f}x")


if __name__ == "__main__":
    main()
