"""Exact event-driven simulation of the SIR model with Weibull infectious periods."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from pdsir.model import IncidenceCounts, LatentPath, ObservationGrid, Params, bin_infections


@dataclass(frozen=True)
class SimConfig:
    s0: int
    i0: int
    params: Params
    horizon: float
    seed: int = 0

    def __post_init__(self):
        if self.s0 < 0:
            raise ValueError("s0 must be non-negative")
        if self.i0 < 1:
            raise ValueError("need at least one initial infective")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")


def _infectious_period(rng, lam, shape):
    return (rng.standard_exponential() / lam) ** (1.0 / shape)


def simulate_sir(cfg: SimConfig, rng: np.random.Generator | None = None) -> LatentPath:
    """Simulate one epidemic on ``[0, T]``.

    Removal times are scheduled once, at infection. Between events the
    infection hazard ``beta * S * I`` is constant, so the next infection
    clock is redrawn after every event.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    beta, lam, a = cfg.params.beta, cfg.params.lam, cfg.params.shape
    T = cfg.horizon

    inf_times = [0.0] * cfg.i0
    rem_times = [math.inf] * cfg.i0
    queue = []
    for j in range(cfg.i0):
        heapq.heappush(queue, (_infectious_period(rng, lam, a), j))

    s, i, t = cfg.s0, cfg.i0, 0.0
    while i > 0:
        rate = beta * s * i
        t_inf = t + rng.standard_exponential() / rate if rate > 0 else math.inf
        t_rem = queue[0][0]
        t_next = min(t_inf, t_rem)
        if t_next > T:
            break
        if t_rem <= t_inf:
            _, j = heapq.heappop(queue)
            rem_times[j] = t_rem
            i -= 1
            t = t_rem
        else:
            j = len(inf_times)
            inf_times.append(t_inf)
            rem_times.append(math.inf)
            heapq.heappush(queue, (t_inf + _infectious_period(rng, lam, a), j))
            s -= 1
            i += 1
            t = t_inf
    return LatentPath(np.array(inf_times), np.array(rem_times), cfg.s0, cfg.i0)


def simulate_dataset(cfg: SimConfig, grid: ObservationGrid,
                     rng: np.random.Generator | None = None) -> tuple[LatentPath, IncidenceCounts]:
    """Simulate a path and bin its infections on ``grid``."""
    if not math.isclose(grid.horizon, cfg.horizon):
        raise ValueError("grid horizon must equal the simulation horizon")
    path = simulate_sir(cfg, rng)
    return path, bin_infections(path, grid)


def simulate_conditioned(cfg: SimConfig, grid: ObservationGrid, min_infections: int = 20,
                         rng: np.random.Generator | None = None, max_tries: int = 10_000):
    """Like :func:`simulate_dataset` but discard epidemics with fewer than
    ``min_infections`` infections in (0, T].

    Returns ``(path, counts, n_discarded)``.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    for tries in range(max_tries):
        path, counts = simulate_dataset(cfg, grid, rng)
        if counts.total >= min_infections:
            return path, counts, tries
    raise RuntimeError(f"no epidemic with >= {min_infections} infections in {max_tries} tries")
