"""Command-line interface: ``pdsir <subcommand> ...``.

Every subcommand writes into ``--out`` and leaves a ``manifest.json`` there
that ``pdsir replay`` can rerun. Wall-clock quantities go to separate
timing files so that all other outputs are byte-identical on replay.

Exit codes: 0 success, 1 usage error, 2 invalid data, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from pdsir import __version__
from pdsir._backend import BACKEND
from pdsir.diagnostics import Scenario, coverage_experiment, rho_sweep, summarize
from pdsir.io import (IncidenceFormatError, RunManifest, read_incidence_csv, sha256_file,
                      write_incidence_csv, write_json, write_path_csv, write_rows_csv,
                      write_samples_csv)
from pdsir.mcmc import McmcConfig, run_chain
from pdsir.minorization import certify, grid_check_infima
from pdsir.model import ObservationGrid, Params, PriorHyper, r0
from pdsir.simulate import SimConfig, simulate_conditioned, simulate_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

# Default scenarios (lambda = 1, a = 2, i0 = 10, T = 6): beta * s0 = c * Gamma(1.5)
# for c = 2.2, 2.5, 3, which leaves most outbreaks still active at T.
SWEEP_R0 = tuple(round(c * math.gamma(1.5) ** 2, 4) for c in (2.2, 2.5, 3.0))
SWEEP_DETERMINISTIC = ("scenario", "s0", "n_infections", "rho", "n_select", "acceptance_rate",
                       "ess_beta", "ess_lambda", "ess_r0")
SWEEP_TIMING = ("scenario", "s0", "rho", "runtime", "ess_per_sec_beta", "ess_per_sec_lambda",
                "ess_per_sec_r0", "ess_per_sec_min")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- arg types


def _positive(conv):
    def check(text):
        try:
            v = conv(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if not v > 0 or (isinstance(v, float) and not math.isfinite(v)):
            raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
        return v
    return check


def _non_negative_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text!r}")
    return v


def _unit_interval(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text!r}")
    return v


def _float_list(check):
    def parse(text):
        return [check(t.strip()) for t in text.split(",") if t.strip()]
    return parse


def _priors(text):
    parts = _float_list(_positive(float))(text)
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected a_beta,b_beta,a_lambda,b_lambda")
    return parts


pos_int = _positive(int)
pos_float = _positive(float)


# ---------------------------------------------------------------- parser


def _add_out(p):
    p.add_argument("--out", required=True, help="output directory (created if missing)")


def _add_chain(p, with_rho=True):
    p.add_argument("--data", required=True, help="incidence CSV (interval_end_time,count)")
    p.add_argument("--s0", type=_non_negative_int, required=True, help="initial susceptibles")
    p.add_argument("--i0", type=pos_int, required=True, help="initial infectives")
    p.add_argument("--shape", type=pos_float, default=1.0, help="known Weibull shape")
    p.add_argument("--iters", type=pos_int, required=True)
    p.add_argument("--thin", type=pos_int, default=1)
    if with_rho:
        p.add_argument("--rho", type=_unit_interval, default=1.0,
                       help="fraction of infected individuals refreshed per sweep")
    p.add_argument("--seed", type=_non_negative_int, default=0)
    p.add_argument("--priors", type=_priors, default=[0.01, 1.0, 0.01, 1.0],
                   help="a_beta,b_beta,a_lambda,b_lambda (default 0.01,1,0.01,1)")
    p.add_argument("--init-beta", type=pos_float, help="initial beta (default: prior mean)")
    p.add_argument("--init-lambda", type=pos_float, help="initial lambda (default: prior mean)")
    p.add_argument("--burn-in", type=_non_negative_int,
                   help="sweeps dropped before summarising (default: iters // 10)")
    p.add_argument("--mass", type=_unit_interval, default=0.9, help="credible mass")
    _add_out(p)


def _add_epidemic(p, defaults=None):
    d = defaults or {}
    p.add_argument("--s0", type=_non_negative_int, required="s0" not in d, default=d.get("s0"))
    p.add_argument("--i0", type=pos_int, required="i0" not in d, default=d.get("i0"))
    p.add_argument("--beta", type=pos_float, required="beta" not in d, default=d.get("beta"))
    p.add_argument("--lambda", dest="lam", type=pos_float, default=d.get("lam", 1.0))
    p.add_argument("--shape", type=pos_float, default=d.get("shape", 1.0))
    p.add_argument("--horizon", type=pos_float, required="horizon" not in d, default=d.get("horizon"))
    p.add_argument("--k", type=pos_int, required="k" not in d, default=d.get("k"),
                   help="number of equal-width observation intervals")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdsir", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pdsir {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate an epidemic and its incidence counts")
    _add_epidemic(p)
    p.add_argument("--seed", type=_non_negative_int, default=0)
    p.add_argument("--min-infections", type=_non_negative_int, default=0,
                   help="resample epidemics with fewer infections than this")
    p.add_argument("--units", default=None, help="time unit written to the CSV header")
    _add_out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="block PD-SIR data-augmentation sampler")
    _add_chain(p)
    p.set_defaults(func=cmd_fit, mode="block")

    p = sub.add_parser("single-site", help="one-individual-per-sweep baseline sampler")
    _add_chain(p, with_rho=False)
    p.set_defaults(func=cmd_fit, mode="single_site", rho=1.0)

    p = sub.add_parser("rho-sweep", help="runtime, acceptance and ESS/sec across rho")
    p.add_argument("--s0-list", type=_float_list(pos_int), default=[250, 500, 1000])
    p.add_argument("--r0-list", type=_float_list(pos_float), default=list(SWEEP_R0),
                   help="true R0 per scenario, paired with --s0-list")
    p.add_argument("--rho-list", type=_float_list(_unit_interval),
                   default=[0.02, 0.05, 0.1, 0.25, 0.5, 1.0])
    p.add_argument("--i0", type=pos_int, default=10)
    p.add_argument("--lambda", dest="lam", type=pos_float, default=1.0)
    p.add_argument("--shape", type=pos_float, default=2.0)
    p.add_argument("--horizon", type=pos_float, default=6.0)
    p.add_argument("--k", type=pos_int, default=10)
    p.add_argument("--iters", type=pos_int, required=True)
    p.add_argument("--thin", type=pos_int, default=1)
    p.add_argument("--seed", type=_non_negative_int, default=0)
    p.add_argument("--min-infections", type=_non_negative_int, default=20)
    p.add_argument("--priors", type=_priors, default=[0.01, 1.0, 0.01, 1.0])
    _add_out(p)
    p.set_defaults(func=cmd_rho_sweep)

    p = sub.add_parser("coverage", help="simulate-and-fit credible interval coverage study")
    _add_epidemic(p, {"s0": 250, "i0": 10, "lam": 1.0, "shape": 2.0, "horizon": 6.0, "k": 10,
                      "beta": SWEEP_R0[0] / (250 * math.gamma(1.5))})
    p.add_argument("--replications", type=pos_int, default=200)
    p.add_argument("--iters", type=pos_int, required=True)
    p.add_argument("--thin", type=pos_int, default=1)
    p.add_argument("--rho", type=_unit_interval, default=1.0)
    p.add_argument("--seed", type=_non_negative_int, default=0)
    p.add_argument("--workers", type=pos_int, default=None)
    p.add_argument("--min-infections", type=_non_negative_int, default=20)
    p.add_argument("--burn-in", type=_non_negative_int)
    p.add_argument("--mass", type=_unit_interval, default=0.9)
    p.add_argument("--priors", type=_priors, default=[0.01, 1.0, 0.01, 1.0])
    p.add_argument("--fixed-lambda", type=pos_float, default=None,
                   help="hold lambda fixed in the fitter (negative control)")
    _add_out(p)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("verify-bounds", help="numerical check of the minorization bounds")
    p.add_argument("--instances", type=pos_int, default=1000)
    p.add_argument("--boxes", type=pos_int, default=100)
    p.add_argument("--seed", type=_non_negative_int, default=0)
    _add_out(p)
    p.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest", help="manifest.json written by an earlier run")
    p.add_argument("--out", default=None, help="output directory (default: the recorded one)")
    p.set_defaults(func=None)
    return parser


# ---------------------------------------------------------------- commands


def _grid(args):
    return ObservationGrid.uniform(args.horizon, args.k)


def cmd_simulate(args, out: Path):
    params = Params(args.beta, args.lam, args.shape)
    cfg = SimConfig(args.s0, args.i0, params, args.horizon, args.seed)
    grid = _grid(args)
    rng = np.random.default_rng(args.seed)
    if args.min_infections > 0:
        path, counts, _ = simulate_conditioned(cfg, grid, args.min_infections, rng)
    else:
        path, counts = simulate_dataset(cfg, grid, rng)
    write_incidence_csv(out / "incidence.csv", grid, counts, args.units)
    write_path_csv(out / "true_path.csv", path)
    print(f"{counts.total} infections in (0, {args.horizon:g}]; R0 = {r0(params, args.s0):.4g}")
    return ["incidence.csv", "true_path.csv"]


def cmd_fit(args, out: Path):
    data = read_incidence_csv(args.data)
    data.counts.check(data.grid, args.s0)
    priors = PriorHyper(*args.priors)
    beta0 = args.init_beta or priors.a_beta / priors.b_beta
    lam0 = args.init_lambda or priors.a_lambda / priors.b_lambda
    cfg = McmcConfig(iterations=args.iters, thin=args.thin, rho=args.rho, seed=args.seed,
                     init_params=Params(beta0, lam0, args.shape), priors=priors, mode=args.mode)
    chain = run_chain(data.counts, data.grid, args.s0, args.i0, cfg)
    burn = args.iters // 10 if args.burn_in is None else args.burn_in
    if burn >= args.iters:
        raise UsageError("--burn-in must be smaller than --iters")
    write_samples_csv(out / "samples.csv", chain)
    files = ["samples.csv"]
    kept = int(np.sum(chain.iteration > burn))
    if kept >= 10:
        s = summarize(chain, burn, args.mass, shape=args.shape)
        summary = s.to_dict()
        timing = {"wall_time": chain.wall_time, "ess_per_sec": s.ess_per_sec}
    else:
        summary = {"acceptance_rate": chain.acceptance_rate, "n_draws": kept, "burn_in": burn,
                   "note": "fewer than 10 draws after burn-in; posterior summaries skipped"}
        timing = {"wall_time": chain.wall_time}
    summary.update(n_infections=data.counts.total, n_select=chain.n_select,
                   acceptance_count=chain.acceptance_count, proposal_count=chain.proposal_count,
                   init_attempts=chain.init_attempts, mode=args.mode, rho=args.rho)
    write_json(out / "summary.json", summary)
    write_json(out / "timing.json", timing)
    files += ["summary.json", "timing.json"]
    msg = f"acceptance rate {chain.acceptance_rate:.3f}, {chain.wall_time:.1f} s"
    if "beta" in summary:
        msg += (f"; beta {summary['beta']['mean']:.4g}, lambda {summary['lambda']['mean']:.4g}, "
                f"R0 {summary['r0']['mean']:.4g}, mean infectious period "
                f"{summary['infectious_period']['mean']:.4g}")
    print(msg)
    return files


def cmd_rho_sweep(args, out: Path):
    if len(args.s0_list) != len(args.r0_list):
        raise UsageError("--s0-list and --r0-list must have the same length")
    grid = _grid(args)
    seeds = np.random.SeedSequence(args.seed).spawn(len(args.s0_list) + 1)
    scenarios = []
    for s0, R0, seq in zip(args.s0_list, args.r0_list, seeds):
        params = Params(R0 / (s0 * Params(1.0, args.lam, args.shape).mean_infectious_period()),
                        args.lam, args.shape)
        cfg = SimConfig(s0, args.i0, params, args.horizon)
        _, y, _ = simulate_conditioned(cfg, grid, args.min_infections, np.random.default_rng(seq))
        name = f"s0={s0}"
        write_incidence_csv(out / f"data_s0_{s0}.csv", grid, y)
        scenarios.append(Scenario(name, s0, args.i0, y, grid, params))
    base = McmcConfig(iterations=args.iters, thin=args.thin,
                      seed=int(seeds[-1].generate_state(1, dtype=np.uint64)[0]),
                      priors=PriorHyper(*args.priors))
    rows = rho_sweep(scenarios, args.rho_list, base)
    write_rows_csv(out / "rho_sweep.csv", rows, SWEEP_DETERMINISTIC)
    write_rows_csv(out / "rho_sweep_timing.csv", rows, SWEEP_TIMING)
    for r in rows:
        print(f"{r['scenario']:>9} rho={r['rho']:<5g} acc={r['acceptance_rate']:.3f} "
              f"time={r['runtime']:.1f}s ess/s(min)={r['ess_per_sec_min']:.2f}")
    return ["rho_sweep.csv", "rho_sweep_timing.csv"] + [f"data_s0_{s}.csv" for s in args.s0_list]


def cmd_coverage(args, out: Path):
    params = Params(args.beta, args.lam, args.shape)
    sim = SimConfig(args.s0, args.i0, params, args.horizon, args.seed)
    mcfg = McmcConfig(iterations=args.iters, thin=args.thin, rho=args.rho,
                      priors=PriorHyper(*args.priors), fixed_lambda=args.fixed_lambda)
    res = coverage_experiment(params, sim, mcfg, args.replications, _grid(args),
                              burn_in=args.burn_in, mass=args.mass,
                              min_infections=args.min_infections, workers=args.workers)
    write_rows_csv(out / "coverage_replicates.csv", res.rows())
    write_json(out / "coverage_summary.json", {
        "coverage": res.rates, "std_error": res.std_errors,
        "mean_posterior_mean": res.mean_posterior_means,
        "truth": {"beta": params.beta, "lambda": params.lam, "r0": r0(params, args.s0)},
        "replications": res.replications, "n_discarded": res.n_discarded,
        "mean_acceptance_rate": res.mean_acceptance, "ci_mass": args.mass})
    for name, rate in res.rates.items():
        print(f"{name:>7}: coverage {rate:.3f} +- {res.std_errors[name]:.3f}")
    return ["coverage_replicates.csv", "coverage_summary.json"]


def cmd_verify_bounds(args, out: Path):
    rows = certify(args.instances, args.seed)
    boxes = grid_check_infima(args.boxes, args.seed)
    write_rows_csv(out / "bounds.csv", rows)
    write_rows_csv(out / "infima.csv", boxes)
    kr_bad = sum(not r["k_r_ok"] for r in rows)
    kt_bad = sum(not r["k_theta_ok"] for r in rows)
    worst = {k: max(b[f"max_rel_err_{k}"] for b in boxes) for k in ("rate", "shape", "joint")}
    write_json(out / "bounds_summary.json", {"instances": args.instances, "k_r_violations": kr_bad,
                                             "k_theta_violations": kt_bad,
                                             "max_rel_err_infima": worst})
    print(f"k_r violations {kr_bad}/{args.instances}, k_theta violations {kt_bad}/{args.instances}, "
          f"worst infimum relative error {max(worst.values()):.2e}")
    if kr_bad or kt_bad:
        raise RuntimeError("minorization bound violated")
    return ["bounds.csv", "infima.csv", "bounds_summary.json"]


# ---------------------------------------------------------------- driver


def _record(args) -> dict:
    rec = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    if rec.get("data"):
        rec["data"] = str(Path(rec["data"]).resolve())
    return rec


def _execute(args, out: Path, command: str) -> int:
    out.mkdir(parents=True, exist_ok=True)
    data_sha = sha256_file(args.data) if getattr(args, "data", None) else None
    start = time.perf_counter()
    files = args.func(args, out)
    manifest = RunManifest(command=command, args=_record(args), seed=getattr(args, "seed", None),
                           data_sha256=data_sha, version=__version__,
                           wall_time=time.perf_counter() - start, outputs=files, backend=BACKEND)
    manifest.write(out / "manifest.json")
    return EXIT_OK


def _replay(args) -> int:
    man = RunManifest.read(args.manifest)
    parser = build_parser()
    sub_defaults = parser.parse_args([man.command, *_required_stub(man.command)])
    ns = argparse.Namespace(**{**vars(sub_defaults), **man.args})
    if man.data_sha256 is not None and sha256_file(ns.data) != man.data_sha256:
        raise ValueError(f"data file {ns.data} changed since the recorded run (checksum mismatch)")
    out = Path(args.out) if args.out else Path(args.manifest).resolve().parent
    return _execute(ns, out, man.command)


def _required_stub(command):
    # placeholder values so the subparser yields its func and defaults
    stubs = {"simulate": ["--s0", "1", "--i0", "1", "--beta", "1", "--horizon", "1", "--k", "1"],
             "fit": ["--data", "x", "--s0", "1", "--i0", "1", "--iters", "1"],
             "single-site": ["--data", "x", "--s0", "1", "--i0", "1", "--iters", "1"],
             "rho-sweep": ["--iters", "1"], "coverage": ["--iters", "1"], "verify-bounds": []}
    if command not in stubs:
        raise ValueError(f"unknown command {command!r} in manifest")
    return stubs[command] + ["--out", "."]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            return _replay(args)
        return _execute(args, Path(args.out), args.command)
    except UsageError as e:
        print(f"pdsir: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (IncidenceFormatError, ValueError, FileNotFoundError) as e:
        print(f"pdsir: invalid input: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001 - top-level reporting
        print(f"pdsir: failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
