"""Data-augmented MCMC for the SIR model given incidence counts.

One iteration is: a Gibbs draw of ``beta``, a Gibbs draw of ``lambda``,
then a Metropolis-Hastings update of the latent path with a PD-SIR
subset proposal. The whole loop runs inside one compiled kernel; the
Python-level helpers below expose the same steps for testing and for
custom proposals.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from pdsir._backend import kernels
from pdsir.model import (IncidenceCounts, LatentPath, ObservationGrid, Params, PriorHyper,
                         SufficientStats, sir_loglik)
from pdsir.proposal import (ProposalConfig, ProposalResult, check_layout, interval_labels,
                            propose_full, propose_subset, proposal_logdensity, subset_size)

MAX_INIT_ATTEMPTS = 1000


@dataclass(frozen=True)
class McmcConfig:
    """Chain settings.

    Parameters
    ----------
    iterations : int
        Number of full sweeps.
    thin : int
        Keep every ``thin``-th sweep.
    rho : float
        Fraction of infected individuals refreshed per latent update.
    seed : int
        Seed for ``numpy.random.default_rng``.
    init_params : Params
        Starting values of ``beta`` and ``lambda`` (and the known shape).
        Required by :func:`run_chain`; harnesses may fill it in.
    priors : PriorHyper
        Gamma prior hyperparameters.
    mode : {"block", "single_site"}
        ``single_site`` refreshes exactly one infected individual per sweep.
    fixed_lambda : float, optional
        Hold ``lambda`` at this value instead of sampling it.
    backend : {"numba", "numpy"}, optional
        Kernel implementation; defaults to the ``PDSIR_BACKEND`` setting.
    """

    iterations: int
    init_params: Params | None = None
    thin: int = 1
    rho: float = 1.0
    seed: int = 0
    priors: PriorHyper = field(default_factory=PriorHyper)
    mode: str = "block"
    fixed_lambda: float | None = None
    backend: str | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.thin < 1 or self.thin > self.iterations:
            raise ValueError("thin must lie in [1, iterations]")
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho!r}")
        if self.mode not in ("block", "single_site"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.fixed_lambda is not None and not self.fixed_lambda > 0:
            raise ValueError("fixed_lambda must be positive")

    def n_select(self, n_infected: int) -> int:
        if self.mode == "single_site":
            return min(1, n_infected)
        return subset_size(self.rho, n_infected)


@dataclass(frozen=True, eq=False)
class ChainOutput:
    """Thinned draws and run statistics.

    ``accepted[j]`` records whether the latent update of the kept sweep
    ``iteration[j]`` was accepted; ``acceptance_count`` counts all sweeps.
    """

    iteration: np.ndarray
    beta: np.ndarray
    lam: np.ndarray
    r0: np.ndarray
    loglik: np.ndarray
    accepted: np.ndarray
    acceptance_count: int
    proposal_count: int
    wall_time: float
    final_path: LatentPath
    init_attempts: int
    n_select: int

    @property
    def acceptance_rate(self) -> float:
        return self.acceptance_count / self.proposal_count

    def after_burn_in(self, burn_in: int) -> dict[str, np.ndarray]:
        """Draws from sweeps after the first ``burn_in``."""
        keep = self.iteration > burn_in
        return {"beta": self.beta[keep], "lambda": self.lam[keep], "r0": self.r0[keep]}


def gibbs_beta(stats: SufficientStats, priors: PriorHyper, rng: np.random.Generator) -> float:
    """Draw ``beta`` from its gamma full conditional."""
    return float(rng.gamma(priors.a_beta + stats.n_infections, 1.0 / (priors.b_beta + stats.integral_si)))


def gibbs_lambda(stats: SufficientStats, priors: PriorHyper, rng: np.random.Generator) -> float:
    """Draw ``lambda`` from its gamma full conditional."""
    return float(rng.gamma(priors.a_lambda + stats.n_removals,
                           1.0 / (priors.b_lambda + stats.sum_powered_durations)))


def mh_log_ratio(current: LatentPath, result: ProposalResult, y: IncidenceCounts,
                 grid: ObservationGrid, params: Params) -> float:
    """Log acceptance ratio of a subset proposal; ``nan`` for ``-inf - -inf``."""
    ll_prop = sir_loglik(result.path, params, grid)
    ll_cur = sir_loglik(current, params, grid)
    lq_rev = proposal_logdensity(current, result.updated_set, y, grid, params)
    with np.errstate(invalid="ignore"):
        return float(np.float64(ll_prop) - ll_cur + (lq_rev - result.log_q_forward))


def mh_latent_step(params: Params, path: LatentPath, y: IncidenceCounts, grid: ObservationGrid,
                   cfg: ProposalConfig, rng: np.random.Generator,
                   proposal: Callable[..., ProposalResult] = propose_subset):
    """One Metropolis-Hastings update of the latent path.

    Returns ``(new_path, accepted, log_alpha)``. ``proposal`` is called as
    ``proposal(path, y, grid, params, cfg, rng)``.
    """
    result = proposal(path, y, grid, params, cfg, rng)
    log_alpha = mh_log_ratio(path, result, y, grid, params)
    ll_prop = sir_loglik(result.path, params, grid)
    if kernels().accept_move(ll_prop, log_alpha, rng.random()):
        return result.path, True, log_alpha
    return path, False, log_alpha


def initial_path(y: IncidenceCounts, grid: ObservationGrid, params: Params, s0: int, i0: int,
                 rng: np.random.Generator, backend: str | None = None,
                 max_attempts: int = MAX_INIT_ATTEMPTS) -> tuple[LatentPath, int]:
    """Draw full PD-SIR paths until one has positive likelihood."""
    for attempt in range(1, max_attempts + 1):
        path = propose_full(y, grid, params, i0, rng, s0=s0, backend=backend).path
        if math.isfinite(sir_loglik(path, params, grid)):
            return path, attempt
    raise RuntimeError(f"no path with positive likelihood after {max_attempts} attempts; "
                       "the data may be incompatible with i0 or the initial parameters")


def run_chain(y: IncidenceCounts, grid: ObservationGrid, s0: int, i0: int,
              cfg: McmcConfig, init_path: LatentPath | None = None) -> ChainOutput:
    """Run the block data-augmentation sampler.

    The chain is a deterministic function of ``(y, grid, s0, i0, cfg)``.
    """
    y.check(grid, s0)
    if i0 < 1:
        raise ValueError("need at least one initial infective")
    if cfg.init_params is None:
        raise ValueError("McmcConfig.init_params must be set")
    k = kernels(cfg.backend)
    rng = np.random.default_rng(cfg.seed)
    p = cfg.init_params
    start = time.perf_counter()
    if init_path is None:
        path, attempts = initial_path(y, grid, p, s0, i0, rng, cfg.backend)
    else:
        check_layout(init_path, y, grid)
        path, attempts = init_path, 0

    n_sel = cfg.n_select(y.total)
    fixed = float(cfg.fixed_lambda) if cfg.fixed_lambda is not None else 0.0
    lam0 = fixed if fixed > 0 else p.lam
    pr = cfg.priors
    draws, flags, n_acc, cur_inf, cur_rem = k.run_chain_loop(
        np.array(path.infection_time), np.array(path.removal_time), i0, s0,
        interval_labels(y, i0), grid.breakpoints, y.cumulative, float(p.shape), p.beta, lam0,
        pr.a_beta, pr.b_beta, pr.a_lambda, pr.b_lambda, fixed, cfg.iterations, cfg.thin,
        n_sel, rng)
    wall = time.perf_counter() - start
    return ChainOutput(
        iteration=draws[:, 0].astype(np.int64), beta=draws[:, 1].copy(), lam=draws[:, 2].copy(),
        r0=draws[:, 3].copy(), loglik=draws[:, 4].copy(), accepted=np.asarray(flags, dtype=bool),
        acceptance_count=int(n_acc), proposal_count=cfg.iterations, wall_time=wall,
        final_path=LatentPath(cur_inf, cur_rem, s0, i0), init_attempts=attempts, n_select=n_sel)


def run_single_site(y: IncidenceCounts, grid: ObservationGrid, s0: int, i0: int,
                    cfg: McmcConfig, init_path: LatentPath | None = None) -> ChainOutput:
    """Baseline sampler that refreshes one infected individual per sweep."""
    from dataclasses import replace
    return run_chain(y, grid, s0, i0, replace(cfg, mode="single_site"), init_path)
