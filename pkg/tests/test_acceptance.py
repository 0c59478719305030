"""End-to-end acceptance criteria.

Each test prints one ``[PASS]``/``[FAIL]`` line (also collected in the
terminal summary). The whole module takes roughly 1.5 hours on one core;
deselect it with ``-m "not acceptance"``.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import time
from importlib.resources import files

import numpy as np
import pytest
from scipy import stats

from conftest import REF_I0, REF_PARAMS, REF_S0, REF_Y, record_acceptance
from oracles import grid_posterior_mean_beta, linear_death_times, order_statistic_cdf, trunc_exp_cdf
from pdsir._backend import kernels
from pdsir.cli import SWEEP_R0, main
from pdsir.diagnostics import coverage_experiment, summarize
from pdsir.mcmc import McmcConfig, gibbs_beta, gibbs_lambda, run_chain
from pdsir.minorization import certify, grid_check_infima
from pdsir.model import IncidenceCounts, ObservationGrid, Params, PriorHyper, SufficientStats, bin_infections, r0
from pdsir.proposal import ProposalConfig, propose_full, propose_subset
from pdsir.simulate import SimConfig

pytestmark = pytest.mark.acceptance

STANDIN = files("pdsir") / "data" / "ebola_standin_73wk.csv"
P_MIN = 1e-3


def criterion(number, title):
    """Record a FAIL line if the test body raises before reporting."""
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except AssertionError:
                raise
            except Exception as e:
                record_acceptance(number, title, False, f"error: {type(e).__name__}: {e}")
                raise
        return run
    return wrap


def report(number, title, passed, detail):
    record_acceptance(number, title, passed, detail)
    assert passed, detail


def ref_data():
    return IncidenceCounts(np.array(REF_Y)), ObservationGrid.uniform(6.0, 10)


# ---------------------------------------------------------------- 1


@criterion(1, "proposal consistency")
def test_01_proposal_consistency():
    rng = np.random.default_rng(1)
    # compile outside the timed loop
    propose_full(IncidenceCounts(np.array([1])), ObservationGrid.uniform(1.0, 1), Params(1, 1), 1, rng, s0=2)
    ok = 0
    n = 10_000
    t0 = time.perf_counter()
    for i in range(n):
        K = int(rng.integers(1, 12))
        y = IncidenceCounts(rng.integers(0, 8, K))
        grid = ObservationGrid(np.concatenate(([0.0], np.cumsum(rng.uniform(0.05, 3.0, K)))))
        p = Params(float(np.exp(rng.uniform(-5, 1))), float(np.exp(rng.uniform(-3, 2))),
                   float(rng.choice([0.5, 1.0, 2.0, 3.0])))
        s0 = y.total + int(rng.integers(0, 20))
        i0 = int(rng.integers(1, 6))
        res = propose_full(y, grid, p, i0, rng, s0=s0)
        if i % 2:
            res = propose_subset(res.path, y, grid, p, ProposalConfig(float(rng.uniform(0.01, 1.0))), rng)
        ok += bin_infections(res.path, grid) == y and not res.path.violations(grid.horizon)
    elapsed = time.perf_counter() - t0
    report(1, "proposal consistency", ok == n and elapsed < 30,
           f"{ok}/{n} proposals reproduce Y exactly, {elapsed:.1f} s (limit 30 s)")


# ---------------------------------------------------------------- 2


@criterion(2, "death-process oracle")
def test_02_death_process_oracle():
    t0 = time.perf_counter()
    n_keep = 10_000
    k = kernels()
    worst = 1.0
    for N in (1, 2, 3):
        for mu in (0.5, 2.0):
            rng = np.random.default_rng(1000 * N + int(10 * mu))
            kept, have = [], 0
            while have < n_keep:
                t = linear_death_times(6, mu, 0.0, 1.0, 100_000, rng)
                sel = t[np.isfinite(t).sum(axis=1) == N][:, :N]
                kept.append(sel)
                have += sel.shape[0]
            kept = np.concatenate(kept)[:n_keep]
            ours = np.sort(np.array([[k.trunc_exp_draw(1.0 - rng.random(), mu, 0.0, 1.0) for _ in range(N)]
                                     for _ in range(n_keep)]), axis=1)
            cdf = lambda x, mu=mu: trunc_exp_cdf(x, mu, 0.0, 1.0)  # noqa: E731
            for j in range(N):
                oc = lambda x, j=j: order_statistic_cdf(x, j + 1, N, cdf)  # noqa: E731
                worst = min(worst, stats.kstest(kept[:, j], oc).pvalue, stats.kstest(ours[:, j], oc).pvalue,
                            stats.ks_2samp(kept[:, j], ours[:, j]).pvalue)
    elapsed = time.perf_counter() - t0
    report(2, "death-process oracle", worst > P_MIN and elapsed < 120,
           f"min KS p-value {worst:.3g} over N in {{1,2,3}}, mu in {{0.5,2}} (need > {P_MIN}); {elapsed:.0f} s")


# ---------------------------------------------------------------- 3


@criterion(3, "Gibbs conditionals")
def test_03_gibbs_ks():
    rng = np.random.default_rng(3)
    priors = PriorHyper()
    fixtures = [SufficientStats(0, 0, 0.0, 0.0), SufficientStats(746, 700, 3.2e5, 640.0),
                SufficientStats(3, 1, 2.5, 0.7)]
    worst = 1.0
    for st in fixtures:
        b = np.array([gibbs_beta(st, priors, rng) for _ in range(100_000)])
        lm = np.array([gibbs_lambda(st, priors, rng) for _ in range(100_000)])
        fb = stats.gamma(priors.a_beta + st.n_infections, scale=1 / (priors.b_beta + st.integral_si))
        fl = stats.gamma(priors.a_lambda + st.n_removals, scale=1 / (priors.b_lambda + st.sum_powered_durations))
        worst = min(worst, stats.kstest(b, fb.cdf).pvalue, stats.kstest(lm, fl.cdf).pvalue)
    report(3, "Gibbs conditionals", worst > P_MIN,
           f"min KS p-value {worst:.3g} over 3 fixtures x 2 parameters, 1e5 draws each (need > {P_MIN})")


# ---------------------------------------------------------------- 4


@criterion(4, "tiny-case exactness")
def test_04_tiny_case():
    t0 = time.perf_counter()
    s0, i0 = 5, 1
    grid = ObservationGrid(np.array([0.0, 2.0, 4.0]))
    y = IncidenceCounts(np.array([2, 1]))
    priors = PriorHyper(2.0, 4.0, 2.0, 2.0)
    truth, _ = grid_posterior_mean_beta(s0, i0, grid.breakpoints, y.counts, (2.0, 4.0, 2.0, 2.0), 6.0, 12.0,
                                        nodes=90)
    lines, ok = [], True
    for rho, seed in ((1.0, 41), (0.5, 42)):
        cfg = McmcConfig(iterations=2_000_000, thin=2, rho=rho, seed=seed, priors=priors,
                         init_params=Params(0.5, 1.0, 1.0))
        chain = run_chain(y, grid, s0, i0, cfg)
        d = chain.after_burn_in(10_000)["beta"]
        se = d.std(ddof=1) / math.sqrt(summarize(chain, 10_000).beta.ess)
        z = (d.mean() - truth) / se
        ok &= abs(z) < 3
        lines.append(f"rho={rho:g} (refresh {chain.n_select}): {d.mean():.5f} (SE {se:.5f}, z={z:+.2f})")
    elapsed = time.perf_counter() - t0
    report(4, "tiny-case exactness", ok and elapsed < 600,
           f"oracle E[beta|Y] = {truth:.5f}; " + "; ".join(lines) + f"; {elapsed:.0f} s")


# ---------------------------------------------------------------- 5


@criterion(5, "reference replication")
def test_05_reference_replication():
    y, grid = ref_data()
    init = Params(REF_PARAMS.beta / 10, REF_PARAMS.lam / 10, 2.0)
    cfg = McmcConfig(iterations=1_000_000, thin=10, rho=0.2, seed=5, init_params=init)
    chain = run_chain(y, grid, REF_S0, REF_I0, cfg)
    s = summarize(chain, burn_in=50_000)
    truth = {"beta": REF_PARAMS.beta, "lambda": REF_PARAMS.lam, "r0": r0(REF_PARAMS, REF_S0)}
    covered = {n: s.param(n).covers(v) for n, v in truth.items()}
    acc_ok = abs(chain.acceptance_rate - 0.21) <= 0.05
    ok = acc_ok and all(covered.values()) and chain.wall_time < 1800
    ci = ", ".join(f"{n} ({s.param(n).ci_lower:.4g}, {s.param(n).ci_upper:.4g}) covers {truth[n]:.4g}: {covered[n]}"
                   for n in truth)
    report(5, "reference replication", ok,
           f"acceptance {chain.acceptance_rate:.3f} (0.21 +- 0.05); {ci}; {chain.wall_time:.0f} s (limit 1800)")


# ---------------------------------------------------------------- 6


COVERAGE_ITERS = 100_000
COVERAGE_RHO = 0.5  # most efficient rho for this population size in the sweep


@criterion(6, "coverage at s0 = 250")
def test_06_coverage():
    t0 = time.perf_counter()
    s0 = 250
    params = Params(SWEEP_R0[0] / (s0 * math.gamma(1.5)), 1.0, 2.0)
    res = coverage_experiment(params, SimConfig(s0, 10, params, 6.0, seed=6),
                              McmcConfig(iterations=COVERAGE_ITERS, thin=10, rho=COVERAGE_RHO),
                              replications=200, grid=ObservationGrid.uniform(6.0, 10))
    elapsed = time.perf_counter() - t0
    inside = {n: 0.84 <= v <= 0.96 for n, v in res.rates.items()}
    lam_bias = res.mean_posterior_means["lambda"] / params.lam - 1
    report(6, "coverage at s0 = 250", all(inside.values()) and elapsed < 7200,
           ", ".join(f"{n} {v:.3f}" for n, v in res.rates.items()) + " (need [0.84, 0.96]); "
           f"mean posterior mean of lambda {res.mean_posterior_means['lambda']:.3f} ({100 * lam_bias:+.1f}%); "
           f"mean acceptance {res.mean_acceptance:.3f}; {elapsed / 60:.0f} min (limit 120)")


# ---------------------------------------------------------------- 7


@criterion(7, "block vs single-site")
def test_07_block_vs_single_site():
    t0 = time.perf_counter()
    y, grid = ref_data()
    out = {}
    for mode, rho in (("block", 0.1), ("single_site", 1.0)):
        cfg = McmcConfig(iterations=1_000_000, thin=10, rho=rho, seed=7, init_params=REF_PARAMS, mode=mode)
        out[mode] = summarize(run_chain(y, grid, REF_S0, REF_I0, cfg), burn_in=100_000).ess_per_sec
    ratio = {n: out["block"][n] / out["single_site"][n] for n in ("beta", "lambda", "r0")}
    elapsed = time.perf_counter() - t0
    report(7, "block vs single-site", all(v >= 5 for v in ratio.values()) and elapsed < 3600,
           "ESS/sec ratios " + ", ".join(f"{n} {v:.1f}x" for n, v in ratio.items()) + " (need >= 5x); "
           + "block " + ", ".join(f"{n} {v:.2f}/s" for n, v in out["block"].items()) + f"; {elapsed:.0f} s")


# ---------------------------------------------------------------- 8


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@criterion(8, "rho sweep")
def test_08_rho_sweep(tmp_path):
    assert main(["rho-sweep", "--iters", "200000", "--thin", "10", "--seed", "8", "--out", str(tmp_path)]) == 0
    rows = _read_rows(tmp_path / "rho_sweep.csv")
    timing = _read_rows(tmp_path / "rho_sweep_timing.csv")
    by = {}
    for r, t in zip(rows, timing):
        by.setdefault(int(r["s0"]), []).append((float(r["rho"]), float(r["acceptance_rate"]),
                                                float(t["runtime"]), float(t["ess_per_sec_min"])))
    problems = []
    for s0, seq in by.items():
        seq.sort()
        acc = [a for _, a, _, _ in seq]
        rt = [t for _, _, t, _ in seq]
        if any(b > a + 0.01 for a, b in zip(acc, acc[1:])):
            problems.append(f"acceptance rises with rho at s0={s0}: {acc}")
        if not rt[-1] > rt[0] or any(b < 0.9 * a for a, b in zip(rt, rt[1:])):
            problems.append(f"runtime not increasing in rho at s0={s0}: {[round(v, 1) for v in rt]}")
    sizes = sorted(by)
    for i in range(len(by[sizes[0]])):
        rt = [by[s][i][2] for s in sizes]
        if not rt[-1] > rt[0] or any(b < 0.9 * a for a, b in zip(rt, rt[1:])):
            problems.append(f"runtime not increasing in n at rho={by[sizes[0]][i][0]}: {rt}")
    best = max(by[250], key=lambda r: r[3])[0]
    if best not in (0.5, 1.0):
        problems.append(f"s0=250 ESS/sec maximised at rho={best}")
    summary = "; ".join(f"s0={s}: acc " + "/".join(f"{a:.2f}" for _, a, _, _ in by[s]) for s in sizes)
    report(8, "rho sweep", not problems,
           (summary + f"; s0=250 min ESS/sec " + "/".join(f"{e:.1f}" for *_, e in by[250])
            + f", best rho {best}") + ("" if not problems else " | " + " | ".join(problems)))


# ---------------------------------------------------------------- 9


@criterion(9, "minorization certificate")
def test_09_minorization():
    rows = certify(1000, seed=9)
    kr = sum(not r["k_r_ok"] for r in rows)
    kt = sum(not r["k_theta_ok"] for r in rows)
    boxes = grid_check_infima(100, seed=9)
    err = max(max(b["max_rel_err_rate"], b["max_rel_err_shape"], b["max_rel_err_joint"]) for b in boxes)
    report(9, "minorization certificate", kr == 0 and kt == 0 and err < 1e-6,
           f"k_r violations {kr}/1000, k_theta violations {kt}/1000, worst infimum relative error {err:.1e}")


# ---------------------------------------------------------------- 10


@criterion(10, "outbreak-scale pipeline")
def test_10_outbreak_pipeline(tmp_path):
    t0 = time.perf_counter()
    code = main(["fit", "--data", str(STANDIN), "--s0", "291995", "--i0", "5", "--shape", "2",
                 "--iters", "1000000", "--rho", "0.1", "--thin", "10", "--burn-in", "50000",
                 "--seed", "10", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    assert code == 0, f"fit exited with code {code}"
    s = json.loads((tmp_path / "summary.json").read_text())
    acc = s["acceptance_rate"]
    period = s["infectious_period"]["mean"]
    ok = code == 0 and 0.12 <= acc <= 0.30 and 6 <= period <= 12 and elapsed < 7200
    report(10, "outbreak-scale pipeline", ok,
           f"exit {code}; acceptance {acc:.3f} (need [0.12, 0.30]); posterior mean infectious period "
           f"{period:.2f} days (need [6, 12]); {elapsed:.0f} s; synthetic stand-in data")


# ---------------------------------------------------------------- 11


def _snapshot(d):
    skip = {"manifest.json", "timing.json", "rho_sweep_timing.csv"}
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name not in skip}


@criterion(11, "reproducibility")
def test_11_replay(tmp_path):
    sim = tmp_path / "simulate"
    data = sim / "incidence.csv"
    runs = {
        "simulate": ["simulate", "--s0", "300", "--i0", "5", "--beta", "0.008", "--shape", "2", "--horizon", "6",
                     "--k", "10", "--seed", "11", "--min-infections", "20"],
        "fit": ["fit", "--data", str(data), "--s0", "300", "--i0", "5", "--shape", "2", "--iters", "3000",
                "--rho", "0.3", "--seed", "3"],
        "single-site": ["single-site", "--data", str(data), "--s0", "300", "--i0", "5", "--shape", "2",
                        "--iters", "3000", "--seed", "4"],
        "rho-sweep": ["rho-sweep", "--iters", "500", "--s0-list", "100,200", "--r0-list", "1.8,2",
                      "--rho-list", "0.5,1"],
        "coverage": ["coverage", "--iters", "500", "--replications", "3", "--s0", "80", "--workers", "1"],
        "verify-bounds": ["verify-bounds", "--instances", "50", "--boxes", "10", "--seed", "2"],
    }
    bad = []
    for name, argv in runs.items():
        first = tmp_path / name
        assert main(argv + ["--out", str(first)]) == 0, name
        again = tmp_path / f"{name}-replay"
        assert main(["replay", str(first / "manifest.json"), "--out", str(again)]) == 0, name
        a, b = _snapshot(first), _snapshot(again)
        if a != b or not a:
            bad.append(name)
    report(11, "reproducibility", not bad,
           f"replayed {len(runs)} subcommands; byte-identical outputs for "
           f"{len(runs) - len(bad)}/{len(runs)}" + (f" (differ: {', '.join(bad)})" if bad else ""))
