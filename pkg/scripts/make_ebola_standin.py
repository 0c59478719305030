"""Generate the bundled synthetic stand-in for a 73-week Ebola incidence series.

The population has 292000 individuals, 5 of them infectious at time 0.
Infectious periods are Weibull with shape 2 and a mean of 9 days. R0 is 1,
and seeds are tried in order. The first epidemic with exactly 410
infections over the 73 weeks that still has cases in week 50 or later is
kept, so the series spans most of the window like the surveillance data
it stands in for.

Usage: python3 scripts/make_ebola_standin.py [output.csv]
"""

import math
import sys
from pathlib import Path

import numpy as np

from pdsir.io import write_incidence_csv
from pdsir.model import ObservationGrid, Params
from pdsir.simulate import SimConfig, simulate_dataset

N, I0, SHAPE, MEAN_PERIOD, WEEKS, TARGET = 292_000, 5, 2.0, 9.0, 73, 410
R0, LAST_WEEK, MAX_SEEDS = 1.0, 50, 2_000_000


def main(out):
    s0 = N - I0
    lam = (math.gamma(1.0 + 1.0 / SHAPE) / MEAN_PERIOD) ** SHAPE
    params = Params(R0 / (s0 * MEAN_PERIOD), lam, SHAPE)
    grid = ObservationGrid(7.0 * np.arange(WEEKS + 1))
    for seed in range(MAX_SEEDS):
        _, counts = simulate_dataset(SimConfig(s0, I0, params, grid.horizon, seed), grid)
        if counts.total == TARGET and np.flatnonzero(counts.counts).max() >= LAST_WEEK - 1:
            write_incidence_csv(out, grid, counts, units="days")
            print(f"seed={seed} beta={params.beta:.6g} lambda={lam:.6g} -> {out}")
            return
    raise SystemExit("no matching epidemic found")


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src" / "pdsir" / "data" / "ebola_standin_73wk.csv"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)
