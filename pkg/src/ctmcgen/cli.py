"""Command-line surface: estimate, pd, benchmark, risk.

Every command that writes files also writes a ``<output>.manifest.json``
describing the invocation, and every randomized command is bit-reproducible
for a fixed ``--seed``.  Exit codes: 0 success, 1 input/validation problem,
2 estimator failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import io
from .core import validate_generator, pd_curve, identifiability_check
from .datasets import RATINGS, mixed_portfolio, investment_portfolio, speculative_portfolio
from .em import EmConfig, estimate_em
from .errors import CtmcgenError
from .hessian import confidence_intervals, hessian_at
from .mcmc import McmcConfig
from .risk import RiskSpec, risk_charge, risk_error
from .simulate import (
    ALL_METHODS,
    SimSpec,
    estimate_with_method,
    run_benchmark,
    summarize_benchmark,
    write_benchmark_csv,
    write_benchmark_summary,
)

BUILTIN_PORTFOLIOS = {
    "mixed": mixed_portfolio,
    "investment": investment_portfolio,
    "speculative": speculative_portfolio,
}


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on bad arguments."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _fail(code, message):
    sys.stderr.write(f"ctmcgen: {message}\n")
    return code


def _labels(h):
    return list(RATINGS) if h == len(RATINGS) else [f"state{i}" for i in range(h)]


def _parse_grid(text):
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} is not start:end:step")
        start, end, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        grid = np.arange(start, end + step / 2, step)
    else:
        grid = np.array([float(p) for p in text.split(",") if p.strip() != ""])
    if grid.size == 0:
        raise ValueError(f"grid {text!r} is empty")
    return grid


def _mcmc_config(args, seed):
    return McmcConfig(
        runs=args.mcmc_runs,
        burn_in=args.mcmc_burnin,
        seed=seed,
        budget_first10=getattr(args, "budget_first10", None),
        budget_total=getattr(args, "budget_total", None),
    )


def cmd_estimate(args):
    if args.method not in ALL_METHODS:
        return _fail(1, f"unknown method {args.method!r}; choose from {', '.join(ALL_METHODS)}")
    started = time.time()
    try:
        obs = io.load_observations(args.input, renormalize=args.renormalize)
    except (OSError, ValueError, CtmcgenError) as exc:
        return _fail(1, f"cannot load observations: {exc}")
    outputs = [args.out]
    report: dict = {"method": args.method, "input": args.input}
    try:
        if args.method == "em":
            em_report = estimate_em(obs, EmConfig())
            estimate = em_report.estimate
            report.update(
                status=em_report.status,
                iterations=em_report.iterations,
                loglik_trace=[float(v) for v in em_report.loglik_trace],
                boundary_entry=em_report.boundary_entry,
                degenerate_rows=list(em_report.degenerate_rows),
            )
        else:
            estimate, status = estimate_with_method(
                args.method, obs, mcmc_config=_mcmc_config(args, args.seed), seed=args.seed
            )
            report["status"] = status
            if estimate is None:
                return _fail(2, "estimator returned no result (time budget exceeded)")
        diag = identifiability_check(estimate, obs.dt)
        report["identifiability"] = {
            "min_diagonal": diag.min_diagonal,
            "state": diag.state,
            "passed": diag.passed,
        }
    except CtmcgenError as exc:
        return _fail(2, f"estimation failed: {exc}")
    h = estimate.dim
    io.save_matrix_csv(args.out, estimate, labels=_labels(h))
    if args.ci:
        if args.method != "em":
            return _fail(1, "--ci requires --method em")
        try:
            hrep = hessian_at(estimate, obs)
            intervals = confidence_intervals(hrep, estimate)
        except CtmcgenError as exc:
            return _fail(2, f"confidence intervals failed: {exc}")
        ci_path = os.path.splitext(args.out)[0] + ".ci.csv"
        with open(ci_path, "w") as fh:
            fh.write("from,to,estimate,lower,upper,crosses_zero\n")
            lab = _labels(h)
            for (a, b), lo, hi in intervals:
                q_ab = float(np.asarray(estimate)[a, b])
                fh.write(
                    f"{lab[a]},{lab[b]},{q_ab!r},{lo!r},{hi!r},{int(lo < 0 <= hi)}\n"
                )
        outputs.append(ci_path)
        report["hessian_eigen"] = {
            "min": hrep.eigen_min,
            "max": hrep.eigen_max,
            "local_maximum": hrep.is_local_maximum,
            "condition": hrep.condition,
        }
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2, default=str)
            fh.write("\n")
        outputs.append(args.report)
    outputs.append(io.write_manifest(args.out, "estimate", vars(args), args.seed, outputs, started))
    print(f"wrote {', '.join(outputs)}")
    return 0


def cmd_pd(args):
    started = time.time()
    try:
        q = validate_generator(io.load_matrix_csv(args.generator))
        grid = _parse_grid(args.grid)
    except (OSError, ValueError, CtmcgenError) as exc:
        return _fail(1, f"bad input: {exc}")
    h = q.dim
    labels = _labels(h)
    curves = [pd_curve(q, r, grid) for r in range(h - 1)]
    with open(args.out, "w") as fh:
        fh.write("t," + ",".join(f"pd_{labels[r]}" for r in range(h - 1)) + "\n")
        for k, t in enumerate(grid):
            fh.write(",".join([repr(float(t))] + [repr(float(c[k])) for c in curves]) + "\n")
    manifest = io.write_manifest(args.out, "pd", vars(args), None, [args.out], started)
    print(f"wrote {args.out}, {manifest}")
    return 0


def cmd_benchmark(args):
    started = time.time()
    try:
        q_true = validate_generator(io.load_matrix_csv(args.truth))
        obligors = tuple(int(v) for v in args.obligors.split(","))
        methods = tuple(args.methods.split(","))
    except (OSError, ValueError, CtmcgenError) as exc:
        return _fail(1, f"bad input: {exc}")
    for m in methods:
        if m not in ALL_METHODS:
            return _fail(1, f"unknown method {m!r}; choose from {', '.join(ALL_METHODS)}")
    spec = SimSpec(
        true_generator=q_true,
        years=args.years,
        obligors_per_rating=obligors,
        seeds=tuple(range(args.seeds)),
        reinsert_defaults=args.reinsert_defaults,
    )
    workers = int(os.environ.get("CTMCGEN_THREADS", "1"))
    try:
        records = run_benchmark(
            spec, methods, mcmc_config=_mcmc_config(args, 0), n_workers=max(workers, 1)
        )
    except CtmcgenError as exc:
        return _fail(2, f"benchmark failed: {exc}")
    write_benchmark_csv(records, args.out, ratings=_labels(q_true.dim))
    write_benchmark_summary(summarize_benchmark(records, q_true), args.summary)
    outputs = [args.out, args.summary]
    outputs.append(io.write_manifest(args.out, "benchmark", vars(args), None, outputs, started))
    print(f"wrote {', '.join(outputs)}")
    return 0


def cmd_risk(args):
    started = time.time()
    try:
        q = validate_generator(io.load_matrix_csv(args.generator))
        if args.portfolio in BUILTIN_PORTFOLIOS:
            portfolio = BUILTIN_PORTFOLIOS[args.portfolio]()
        else:
            portfolio = io.load_portfolio(args.portfolio)
        spec = RiskSpec(measure=args.measure, sims=args.sims)
    except (OSError, ValueError, KeyError, CtmcgenError) as exc:
        return _fail(1, f"bad input: {exc}")
    try:
        charge, std_error = risk_charge(q, portfolio, spec, seed=args.seed)
    except CtmcgenError as exc:
        return _fail(2, f"risk computation failed: {exc}")
    result = {
        "measure": args.measure,
        "portfolio": portfolio.name,
        "sims": args.sims,
        "seed": args.seed,
        "charge": charge,
        "std_error": std_error,
    }
    if args.compare:
        try:
            q_true = validate_generator(io.load_matrix_csv(args.compare))
        except (OSError, ValueError, CtmcgenError) as exc:
            return _fail(1, f"bad comparison generator: {exc}")
        true_charge, _ = risk_charge(q_true, portfolio, spec, seed=args.seed)
        result["true_charge"] = true_charge
        result["risk_error"] = risk_error([charge], true_charge)
    with open(args.out, "w") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    manifest = io.write_manifest(args.out, "risk", vars(args), args.seed, [args.out], started)
    print(f"wrote {args.out}, {manifest}")
    print(f"{args.measure} charge: {charge:.6g} (batch std error {std_error:.3g})")
    return 0


def _add_mcmc_options(parser, runs=3000, burn_in=300):
    parser.add_argument("--mcmc-runs", type=int, default=runs)
    parser.add_argument("--mcmc-burnin", type=int, default=burn_in)


def build_parser():
    parser = _Parser(prog="ctmcgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    est = sub.add_parser("estimate", help="estimate a generator from observed TPMs")
    est.add_argument("--input", required=True, help="observation JSON file")
    est.add_argument("--method", required=True, help="|".join(ALL_METHODS))
    est.add_argument("--out", required=True, help="output generator CSV")
    est.add_argument("--ci", action="store_true", help="write 95%% confidence intervals (em only)")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--report", help="JSON report path")
    est.add_argument("--renormalize", action="store_true", help="renormalize input TPM rows")
    _add_mcmc_options(est)
    est.set_defaults(handler=cmd_estimate)

    pd = sub.add_parser("pd", help="default-probability curves from a generator")
    pd.add_argument("--generator", required=True, help="generator CSV")
    pd.add_argument("--grid", required=True, help="start:end:step or comma list of times")
    pd.add_argument("--out", required=True, help="output CSV")
    pd.set_defaults(handler=cmd_pd)

    bench = sub.add_parser("benchmark", help="simulation benchmark against a true generator")
    bench.add_argument("--truth", required=True, help="true generator CSV")
    bench.add_argument("--obligors", default="100,200,300,500,750,1000")
    bench.add_argument("--years", type=int, default=4)
    bench.add_argument("--seeds", type=int, default=10)
    bench.add_argument("--methods", default="em,da,wa,qog")
    bench.add_argument("--budget-first10", type=float, default=180.0, dest="budget_first10")
    bench.add_argument("--budget-total", type=float, default=18000.0, dest="budget_total")
    bench.add_argument("--reinsert-defaults", action="store_true")
    bench.add_argument("--out", default="benchmark_records.csv")
    bench.add_argument("--summary", default="benchmark_summary.json")
    _add_mcmc_options(bench)
    bench.set_defaults(handler=cmd_benchmark)

    rsk = sub.add_parser("risk", help="Monte Carlo risk charge for a portfolio")
    rsk.add_argument("--generator", required=True, help="generator CSV")
    rsk.add_argument("--portfolio", required=True, help="mixed|investment|speculative|file.json")
    rsk.add_argument("--measure", default="irc", help="irc|idr|irc-es")
    rsk.add_argument("--sims", type=int, default=1_500_000)
    rsk.add_argument("--seed", type=int, default=0)
    rsk.add_argument("--compare", help="true generator CSV for risk-error reporting")
    rsk.add_argument("--out", default="risk.json")
    rsk.set_defaults(handler=cmd_risk)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argument errors exit 1, --help exits 0
        return exc.code if isinstance(exc.code, int) else 1
    if not getattr(args, "handler", None):
        parser.print_usage(sys.stderr)
        return 1
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
