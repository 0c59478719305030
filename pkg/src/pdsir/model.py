"""Domain types and complete-data quantities for the stochastic SIR model
with Weibull infectious periods.

A :class:`LatentPath` stores only the individuals that are ever infected:
the ``i0`` initial infectives first (infection time 0), then everyone
infected in ``(0, T]``. The ``s0 - n_I`` individuals never infected carry
infinite times and are left implicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pdsir._backend import kernels


@dataclass(frozen=True)
class Params:
    """Infection rate ``beta``, Weibull scale ``lam`` and known shape ``shape``.

    The infectious-period cdf is ``1 - exp(-lam * x**shape)``.
    """

    beta: float
    lam: float
    shape: float = 1.0

    def __post_init__(self):
        for name in ("beta", "lam", "shape"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    def mean_infectious_period(self) -> float:
        return self.lam ** (-1.0 / self.shape) * math.gamma(1.0 + 1.0 / self.shape)


@dataclass(frozen=True)
class PriorHyper:
    """Shape/rate hyperparameters of the independent gamma priors."""

    a_beta: float = 0.01
    b_beta: float = 1.0
    a_lambda: float = 0.01
    b_lambda: float = 1.0

    def __post_init__(self):
        for name in ("a_beta", "b_beta", "a_lambda", "b_lambda"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")


@dataclass(frozen=True, eq=False)
class ObservationGrid:
    """Breakpoints ``0 = t_0 < t_1 < ... < t_K = T``; interval k is (t_{k-1}, t_k]."""

    breakpoints: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("need at least two breakpoints")
        if t[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if not np.all(np.diff(t) > 0) or not np.all(np.isfinite(t)):
            raise ValueError("breakpoints must be finite and strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "breakpoints", t)

    @classmethod
    def uniform(cls, horizon: float, K: int) -> ObservationGrid:
        return cls(np.linspace(0.0, horizon, K + 1))

    @property
    def K(self) -> int:
        return self.breakpoints.size - 1

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    def interval_of(self, times) -> np.ndarray:
        """Index k of the interval (t_{k-1}, t_k] holding each time; 0 if t <= 0,
        K + 1 if t > T."""
        return np.searchsorted(self.breakpoints, np.asarray(times, dtype=float), side="left")

    def __eq__(self, other):
        return isinstance(other, ObservationGrid) and np.array_equal(self.breakpoints, other.breakpoints)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class IncidenceCounts:
    """Infection counts ``(I_1, ..., I_K)`` per observation interval."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if c.size and (np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0))):
            raise ValueError("counts must be non-negative integers")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def cumulative(self) -> np.ndarray:
        """``[0, I_1, I_1 + I_2, ...]``, length K + 1."""
        return np.concatenate(([0], np.cumsum(self.counts))).astype(np.int64)

    def __len__(self):
        return self.counts.size

    def __eq__(self, other):
        return isinstance(other, IncidenceCounts) and np.array_equal(self.counts, other.counts)

    __hash__ = None

    def check(self, grid: ObservationGrid, s0: int) -> None:
        if self.counts.size != grid.K:
            raise ValueError(f"{self.counts.size} counts for a grid with {grid.K} intervals")
        if self.total > s0:
            raise ValueError(f"{self.total} infections observed but only {s0} susceptibles")


@dataclass(frozen=True, eq=False)
class LatentPath:
    infection_time: np.ndarray
    removal_time: np.ndarray
    s0: int
    i0: int

    def __post_init__(self):
        inf = np.array(self.infection_time, dtype=float)
        rem = np.array(self.removal_time, dtype=float)
        if inf.shape != rem.shape or inf.ndim != 1:
            raise ValueError("infection and removal times must be 1-d arrays of equal length")
        if inf.size < self.i0:
            raise ValueError("fewer individuals than initial infectives")
        if inf.size - self.i0 > self.s0:
            raise ValueError("more infections than susceptibles")
        inf.setflags(write=False)
        rem.setflags(write=False)
        object.__setattr__(self, "infection_time", inf)
        object.__setattr__(self, "removal_time", rem)

    @property
    def n(self) -> int:
        """Population size ``S(0) + I(0)``."""
        return self.s0 + self.i0

    @property
    def n_infected(self) -> int:
        """Infections in (0, T], i.e. excluding the initial infectives."""
        return self.infection_time.size - self.i0

    @property
    def initially_infectious(self) -> np.ndarray:
        flags = np.zeros(self.infection_time.size, dtype=bool)
        flags[: self.i0] = True
        return flags

    def violations(self, horizon: float) -> list[str]:
        """Broken structural invariants; empty for a valid path.

        Infections while nobody is infectious are not structural errors:
        such paths are valid but have zero likelihood.
        """
        out = []
        inf, rem = self.infection_time, self.removal_time
        if np.any(inf[: self.i0] != 0.0):
            out.append("initial infectives must have infection time 0")
        later = inf[self.i0:]
        if np.any(~np.isfinite(later)) or np.any(later <= 0.0) or np.any(later > horizon):
            out.append("infection times must lie in (0, T]")
        finite = np.isfinite(rem)
        if np.any(rem[finite] <= inf[finite]):
            out.append("removal must come after infection")
        if np.any(rem[finite] > horizon):
            out.append("finite removal times must lie in (0, T]")
        if np.any(np.isnan(rem)) or np.any(rem == -np.inf):
            out.append("removal times must be finite or +inf")
        return out

    def arranged(self) -> LatentPath:
        """Same path with the infected individuals grouped by interval, in
        increasing order of infection time."""
        order = np.argsort(self.infection_time[self.i0:], kind="stable") + self.i0
        idx = np.concatenate((np.arange(self.i0), order))
        return LatentPath(self.infection_time[idx], self.removal_time[idx], self.s0, self.i0)

    def full_population(self) -> tuple[np.ndarray, np.ndarray]:
        """Times for all ``n`` individuals, never-infected ones as ``inf``."""
        pad = np.full(self.s0 - self.n_infected, np.inf)
        return (np.concatenate((self.infection_time, pad)), np.concatenate((self.removal_time, pad)))


@dataclass(frozen=True)
class SufficientStats:
    n_infections: int
    n_removals: int
    integral_si: float
    sum_powered_durations: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Right-continuous step functions S, I, R; ``S[i]`` holds on
    ``[times[i], times[i+1])``."""

    times: np.ndarray
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray

    def at(self, t):
        i = np.searchsorted(self.times, t, side="right") - 1
        return self.S[i], self.I[i], self.R[i]


def _event_order(path: LatentPath):
    inf = path.infection_time[path.i0:]
    rem = path.removal_time[np.isfinite(path.removal_time)]
    times = np.concatenate((rem, inf))
    step = np.concatenate((-np.ones(rem.size, dtype=np.int64), np.ones(inf.size, dtype=np.int64)))
    order = np.argsort(times, kind="stable")
    return times[order], step[order]


def compartment_trajectory(path: LatentPath) -> Trajectory:
    times, step = _event_order(path)
    inf_steps = np.cumsum(step > 0)
    rem_steps = np.cumsum(step < 0)
    S = np.concatenate(([path.s0], path.s0 - inf_steps))
    I = np.concatenate(([path.i0], path.i0 + inf_steps - rem_steps))
    R = np.concatenate(([0], rem_steps))
    return Trajectory(np.concatenate(([0.0], times)), S, I, R)


def _summary(path: LatentPath, grid: ObservationGrid, shape: float):
    k = kernels()
    return k.path_summary(path.infection_time, path.removal_time, path.i0, path.s0,
                          grid.horizon, float(shape))


def sufficient_stats(path: LatentPath, grid: ObservationGrid, shape: float) -> SufficientStats:
    n_inf, n_rem, _, integral, _, sum_pow, _ = _summary(path, grid, shape)
    return SufficientStats(int(n_inf), int(n_rem), float(integral), float(sum_pow))


def sir_loglik(path: LatentPath, params: Params, grid: ObservationGrid) -> float:
    """Complete-data log-likelihood; ``-inf`` if someone is infected while
    no one is infectious."""
    k = kernels()
    s = _summary(path, grid, params.shape)
    return float(k.loglik_from_summary(*s, params.beta, params.lam, params.shape))


def bin_infections(path: LatentPath, grid: ObservationGrid) -> IncidenceCounts:
    times = path.infection_time[path.i0:]
    k = grid.interval_of(times)
    k = k[(k >= 1) & (k <= grid.K)]
    return IncidenceCounts(np.bincount(k - 1, minlength=grid.K))


def r0(params: Params, s0: int) -> float:
    """Infection rate times initial susceptibles times mean infectious period."""
    return params.beta * s0 * params.mean_infectious_period()
