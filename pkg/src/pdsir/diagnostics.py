"""Posterior summaries, effective sample size and experiment harnesses."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from pdsir.mcmc import ChainOutput, McmcConfig, run_chain
from pdsir.model import IncidenceCounts, ObservationGrid, Params, r0
from pdsir.simulate import SimConfig, simulate_conditioned

PARAMETERS = ("beta", "lambda", "r0")


def _autocovariance(x: np.ndarray) -> np.ndarray:
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    return np.fft.irfft(f * np.conj(f), nfft)[:n] / n


def ess(series) -> float:
    """Effective sample size by the initial monotone positive sequence rule.

    Autocovariances are summed in adjacent pairs until a pair sum turns
    non-positive; the pair sums are forced to be non-increasing. The result
    is capped at the series length. A constant series has ESS 1.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("ess needs at least 10 draws")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    gamma = _autocovariance(x)
    if gamma[0] <= 0.0:
        return 1.0
    m = (n - 1) // 2
    pairs = gamma[0:2 * m:2] + gamma[1:2 * m:2]
    nonpos = np.flatnonzero(pairs <= 0.0)
    if nonpos.size:
        pairs = pairs[: nonpos[0]]
    pairs = np.minimum.accumulate(pairs)
    tau = (-gamma[0] + 2.0 * pairs.sum()) / gamma[0]
    if tau <= 0.0:
        return float(n)
    return float(min(n, n / tau))


def equal_tailed_ci(series, mass: float = 0.9) -> tuple[float, float]:
    """Empirical ``(1 - mass) / 2`` and ``(1 + mass) / 2`` quantiles, linear interpolation."""
    if not 0 < mass < 1:
        raise ValueError("mass must lie in (0, 1)")
    lo, hi = np.quantile(np.asarray(series, dtype=float), [(1 - mass) / 2, (1 + mass) / 2],
                         method="linear")
    return float(lo), float(hi)


@dataclass(frozen=True)
class ParamSummary:
    mean: float
    sd: float
    ess: float
    ci_lower: float
    ci_upper: float

    def covers(self, value: float) -> bool:
        return self.ci_lower <= value <= self.ci_upper


@dataclass(frozen=True)
class PosteriorSummary:
    """Per-parameter summaries of beta, lambda and R0, plus run statistics.

    ``ess_per_sec`` depends on wall time and is therefore not reproducible
    across runs; everything else is a deterministic function of the draws.
    """

    beta: ParamSummary
    lam: ParamSummary
    r0: ParamSummary
    acceptance_rate: float
    n_draws: int
    burn_in: int
    mass: float
    ess_per_sec: dict = field(default_factory=dict)
    infectious_period: ParamSummary | None = None

    def param(self, name: str) -> ParamSummary:
        return {"beta": self.beta, "lambda": self.lam, "r0": self.r0}[name]

    def to_dict(self, timing: bool = False) -> dict:
        out = {"beta": asdict(self.beta), "lambda": asdict(self.lam), "r0": asdict(self.r0),
               "acceptance_rate": self.acceptance_rate, "n_draws": self.n_draws,
               "burn_in": self.burn_in, "ci_mass": self.mass}
        if self.infectious_period is not None:
            out["infectious_period"] = asdict(self.infectious_period)
        if timing:
            out["ess_per_sec"] = dict(self.ess_per_sec)
        return out


def summarize_series(x, mass: float = 0.9) -> ParamSummary:
    x = np.asarray(x, dtype=float)
    lo, hi = equal_tailed_ci(x, mass)
    return ParamSummary(float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else 0.0,
                        ess(x), lo, hi)


def summarize(chain: ChainOutput, burn_in: int = 0, mass: float = 0.9,
              shape: float | None = None) -> PosteriorSummary:
    """Summaries of the draws from sweeps after ``burn_in``.

    With ``shape`` given, also summarise the mean infectious period
    ``lambda**(-1/shape) * Gamma(1 + 1/shape)``.
    """
    d = chain.after_burn_in(burn_in)
    if d["beta"].size < 10:
        raise ValueError(f"only {d['beta'].size} draws after burn-in; need at least 10")
    parts = {name: summarize_series(d[name], mass) for name in PARAMETERS}
    eps = {name: parts[name].ess / chain.wall_time if chain.wall_time > 0 else math.inf
           for name in PARAMETERS}
    period = None
    if shape is not None:
        period = summarize_series(d["lambda"] ** (-1.0 / shape) * math.gamma(1.0 + 1.0 / shape), mass)
    return PosteriorSummary(parts["beta"], parts["lambda"], parts["r0"], chain.acceptance_rate,
                            int(d["beta"].size), burn_in, mass, eps, period)


# ---------------------------------------------------------------- coverage


@dataclass(frozen=True)
class CoverageResult:
    """Coverage rates with binomial standard errors, per parameter."""

    rates: dict
    std_errors: dict
    mean_posterior_means: dict
    replications: int
    n_discarded: int
    mean_acceptance: float
    table: list

    def rows(self) -> list[dict]:
        return list(self.table)


def _replicate(args):
    idx, seed_seq, true_params, sim_cfg, grid, mcmc_cfg, burn_in, mass, min_infections = args
    sim_seed, chain_seed = (int(v) for v in seed_seq.generate_state(2, dtype=np.uint64))
    rng = np.random.default_rng(sim_seed)
    cfg = replace(sim_cfg, params=true_params)
    _, y, discarded = simulate_conditioned(cfg, grid, min_infections, rng)
    init = mcmc_cfg.init_params if mcmc_cfg.init_params is not None else true_params
    chain = run_chain(y, grid, cfg.s0, cfg.i0, replace(mcmc_cfg, seed=chain_seed, init_params=init))
    s = summarize(chain, burn_in, mass)
    truth = {"beta": true_params.beta, "lambda": true_params.lam, "r0": r0(true_params, cfg.s0)}
    row = {"replicate": idx, "n_infections": y.total, "discarded": discarded,
           "acceptance_rate": chain.acceptance_rate}
    for name in PARAMETERS:
        p = s.param(name)
        row[f"{name}_mean"] = p.mean
        row[f"{name}_lower"] = p.ci_lower
        row[f"{name}_upper"] = p.ci_upper
        row[f"{name}_covered"] = p.covers(truth[name])
    return row


def replicate_seeds(seed: int, replications: int) -> list[np.random.SeedSequence]:
    """Independent, reproducible seed streams, one per replicate."""
    return np.random.SeedSequence(seed).spawn(replications)


def coverage_experiment(true_params: Params, sim_cfg: SimConfig, mcmc_cfg: McmcConfig,
                        replications: int, grid: ObservationGrid, burn_in: int | None = None,
                        mass: float = 0.9, min_infections: int = 20,
                        workers: int | None = None) -> CoverageResult:
    """Simulate-and-fit coverage study of equal-tailed credible intervals.

    Each replicate simulates an epidemic under ``true_params`` (resampling
    those with fewer than ``min_infections`` infections), fits it with
    ``mcmc_cfg`` and records whether each interval covers the truth. The
    chain starts from ``mcmc_cfg.init_params``, or from the truth when that
    is ``None``. Replicate streams are spawned from ``sim_cfg.seed``.
    """
    if replications < 1:
        raise ValueError("replications must be positive")
    if burn_in is None:
        burn_in = mcmc_cfg.iterations // 10
    seqs = replicate_seeds(sim_cfg.seed, replications)
    jobs = [(i, s, true_params, sim_cfg, grid, mcmc_cfg, burn_in, mass, min_infections)
            for i, s in enumerate(seqs)]
    workers = workers or os.cpu_count() or 1
    if workers == 1:
        table = [_replicate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            table = list(pool.map(_replicate, jobs))
    rates, ses, means = {}, {}, {}
    for name in PARAMETERS:
        hits = np.array([r[f"{name}_covered"] for r in table], dtype=float)
        rates[name] = float(hits.mean())
        ses[name] = float(math.sqrt(rates[name] * (1 - rates[name]) / replications))
        means[name] = float(np.mean([r[f"{name}_mean"] for r in table]))
    return CoverageResult(rates, ses, means, replications, int(sum(r["discarded"] for r in table)),
                          float(np.mean([r["acceptance_rate"] for r in table])), table)


# ---------------------------------------------------------------- rho sweep


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    s0: int
    i0: int
    y: IncidenceCounts
    grid: ObservationGrid
    init_params: Params


def rho_sweep(scenarios, rho_values, mcmc_cfg: McmcConfig, burn_in: int | None = None) -> list[dict]:
    """Run every scenario at every ``rho`` and tabulate runtime, acceptance
    rate and ESS per second (per parameter and the minimum over them).

    Runtime is the sampler's wall time, so rows are not reproducible
    bit-for-bit in that column or the ESS/sec columns.
    """
    if burn_in is None:
        burn_in = mcmc_cfg.iterations // 10
    rows = []
    for sc in scenarios:
        for rho in rho_values:
            cfg = replace(mcmc_cfg, rho=float(rho), init_params=sc.init_params, mode="block")
            t0 = time.perf_counter()
            chain = run_chain(sc.y, sc.grid, sc.s0, sc.i0, cfg)
            runtime = time.perf_counter() - t0
            s = summarize(chain, burn_in)
            row = {"scenario": sc.name, "s0": sc.s0, "n_infections": sc.y.total, "rho": float(rho),
                   "n_select": chain.n_select, "runtime": runtime,
                   "acceptance_rate": chain.acceptance_rate}
            for name in PARAMETERS:
                row[f"ess_{name}"] = s.param(name).ess
                row[f"ess_per_sec_{name}"] = s.param(name).ess / runtime
            row["ess_per_sec_min"] = min(row[f"ess_per_sec_{n}"] for n in PARAMETERS)
            rows.append(row)
    return rows
