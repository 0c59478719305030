"""PD-SIR proposals: latent paths consistent with incidence counts.

Within interval k the infection rate is frozen at ``beta * I(t_{k-1})``, so
given ``I_k`` the infection times are i.i.d. truncated exponentials on
``(t_{k-1}, t_k]``. Removal times follow the model's own infectious-period
law, censored at T.

Paths handled here use a fixed layout: initial infectives first, then the
``I_1`` individuals of interval 1, then the ``I_2`` of interval 2, and so
on. Every proposal keeps each individual in its interval slot, which is
what keeps the counts equal to ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pdsir._backend import kernels
from pdsir.model import IncidenceCounts, LatentPath, ObservationGrid, Params


@dataclass(frozen=True)
class ProposalConfig:
    rho: float = 1.0

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho!r}")


@dataclass(frozen=True, eq=False)
class ProposalResult:
    path: LatentPath
    log_q_forward: float
    updated_set: np.ndarray


def subset_size(rho: float, n_infected: int) -> int:
    """``ceil(rho * n_infected)``, guarded against float noise such as
    ``0.1 * 410 = 41.000000000000007``."""
    if n_infected == 0:
        return 0
    return max(1, math.ceil(round(rho * n_infected, 9)))


def interval_labels(y: IncidenceCounts, i0: int) -> np.ndarray:
    """Interval index of every slot in the standard layout (0 for initial infectives)."""
    return np.concatenate((np.zeros(i0, dtype=np.int64),
                           np.repeat(np.arange(1, y.counts.size + 1), y.counts))).astype(np.int64)


def check_layout(path: LatentPath, y: IncidenceCounts, grid: ObservationGrid) -> None:
    if path.n_infected != y.total:
        raise ValueError(f"path has {path.n_infected} infections, counts have {y.total}")
    labels = interval_labels(y, path.i0)[path.i0:]
    if not np.array_equal(grid.interval_of(path.infection_time[path.i0:]), labels):
        raise ValueError("path is not in the interval layout of y (see LatentPath.arranged)")


def _run_propose(inf, rem, s0, i0, selected, y, grid, params, rng, backend):
    k = kernels(backend)
    out_inf = np.empty_like(inf)
    out_rem = np.empty_like(rem)
    lq = k.propose(inf, rem, i0, selected, grid.breakpoints, y.cumulative, params.beta,
                   params.lam, float(params.shape), rng, out_inf, out_rem)
    updated = np.concatenate((np.arange(i0), np.flatnonzero(selected)))
    return ProposalResult(LatentPath(out_inf, out_rem, s0, i0), float(lq), updated)


def propose_full(y: IncidenceCounts, grid: ObservationGrid, params: Params, i0: int,
                 rng: np.random.Generator, *, s0: int, backend: str | None = None) -> ProposalResult:
    """Draw a complete latent path from the PD-SIR process given ``y``.

    ``s0`` is keyword-only because the proposal itself does not depend on
    it; it is needed to build the returned path.
    """
    if i0 < 1:
        raise ValueError("need at least one initial infective")
    y.check(grid, s0)
    m = i0 + y.total
    inf = np.zeros(m)
    # placeholders inside each slot; every non-initial coordinate is redrawn
    inf[i0:] = grid.breakpoints[interval_labels(y, i0)[i0:]]
    rem = np.full(m, np.inf)
    selected = np.ones(m, dtype=bool)
    selected[:i0] = False
    return _run_propose(inf, rem, s0, i0, selected, y, grid, params, rng, backend)


def draw_subset(n_infected: int, i0: int, n_select: int, rng: np.random.Generator,
                backend: str | None = None) -> np.ndarray:
    """Boolean mask over the layout marking ``n_select`` infected individuals."""
    selected = np.zeros(i0 + n_infected, dtype=bool)
    perm = np.empty(max(n_infected, 1), dtype=np.int64)
    kernels(backend).select_subset(n_infected, i0, n_select, rng, selected, perm)
    return selected


def propose_subset(current: LatentPath, y: IncidenceCounts, grid: ObservationGrid, params: Params,
                   cfg: ProposalConfig, rng: np.random.Generator, n_select: int | None = None,
                   backend: str | None = None) -> ProposalResult:
    """Refresh ``ceil(rho * n_I)`` randomly chosen infected individuals plus
    the initial infectives' removal times; everyone else is kept as is.

    Interval rates are computed sequentially from the retained individuals
    and the refreshed ones of earlier intervals.
    """
    check_layout(current, y, grid)
    if n_select is None:
        n_select = subset_size(cfg.rho, current.n_infected)
    selected = draw_subset(current.n_infected, current.i0, n_select, rng, backend)
    return _run_propose(np.array(current.infection_time), np.array(current.removal_time),
                        current.s0, current.i0, selected, y, grid, params, rng, backend)


def proposal_logdensity(path: LatentPath, updated_set, y: IncidenceCounts, grid: ObservationGrid,
                        params: Params, backend: str | None = None) -> float:
    """Log density of the refreshed coordinates of ``path``.

    Initial infectives' removal terms are always included; infected
    individuals contribute when their index is in ``updated_set``. Interval
    rates are recomputed from ``path`` itself, so the same function serves
    the forward and the reverse move. Coordinates outside their interval
    slot give ``-inf``.
    """
    if path.n_infected != y.total:
        raise ValueError("path and counts disagree on the number of infections")
    selected = np.zeros(path.infection_time.size, dtype=bool)
    idx = np.asarray(updated_set, dtype=np.int64)
    selected[idx[idx >= path.i0]] = True
    k = kernels(backend)
    return float(k.proposal_logq(np.array(path.infection_time), np.array(path.removal_time), path.i0,
                                 interval_labels(y, path.i0), selected, grid.breakpoints,
                                 y.cumulative, params.beta, params.lam, float(params.shape)))
