"""Benchmark harness: simulate masked observations, run estimators, score.

The protocol masks a known generator behind finitely many simulated
companies: each year every rating's cohort is scattered by a multinomial
draw on the true one-year transition probabilities, the empirical TPMs
become the observations, and every estimator is scored against the truth
by generator distance and by relative one-year default-probability error.
Cohorts evolve through the simulated years; optionally, defaulted
companies are put back into their pre-default rating so the system stays
fully populated (used by the long-horizon confidence-interval study).
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import linalg
from .core import GeneratorMatrix, ObservationSet
from .em import EmConfig, estimate_em
from .errors import CtmcgenError, ZeroTruePd
from .mcmc import McmcConfig, gibbs_estimate, importance_estimate, mode_estimate
from .regularize import diagonal_adjustment, qog, weighted_adjustment

DETERMINISTIC_METHODS = ("da", "wa", "qog")
MCMC_METHODS = ("mcmc-bs05", "mcmc-bs09", "mcmc-mode")
ALL_METHODS = ("em",) + DETERMINISTIC_METHODS + MCMC_METHODS


@dataclass(frozen=True)
class SimSpec:
    """Masking protocol: truth, horizon in years, obligor levels, seeds."""

    true_generator: GeneratorMatrix
    years: int = 4
    obligors_per_rating: tuple = (100, 200, 300, 500, 750, 1000)
    seeds: tuple = tuple(range(10))
    reinsert_defaults: bool = False

    def __post_init__(self):
        if self.years < 1:
            raise ValueError("need at least one simulated year")
        if any(m < 1 for m in np.atleast_1d(self.obligors_per_rating)):
            raise ValueError("obligor levels must be positive")


@dataclass(frozen=True)
class BenchmarkRecord:
    """Score card of one estimator on one simulated data set."""

    method: str
    seed: int
    obligors: int
    euclid_error: float
    pd_errors: tuple
    pd_estimates: tuple
    seconds: float
    status: str = "ok"


def simulate_tpm_series(spec: SimSpec, seed, obligors=None) -> ObservationSet:
    """Simulate annual empirical TPMs from the spec's true generator.

    ``obligors`` is the starting cohort size per non-default rating and
    defaults to the spec's first level.  Cohorts migrate year over year;
    with ``reinsert_defaults`` the companies lost to default re-enter at
    their pre-default rating before the next year.
    """
    q = np.asarray(spec.true_generator, dtype=float)
    h = q.shape[0]
    if obligors is None:
        obligors = np.atleast_1d(spec.obligors_per_rating)[0]
    rng = np.random.default_rng(seed)
    p_true = linalg.expm(q, 1.0)
    pop = np.zeros(h, dtype=np.int64)
    pop[: h - 1] = int(obligors)
    counts = np.zeros((spec.years, h, h))
    for year in range(spec.years):
        for i in range(h - 1):
            if pop[i] > 0:
                counts[year, i] = rng.multinomial(pop[i], p_true[i])
        counts[year, h - 1, h - 1] = pop[h - 1]
        pop = counts[year].sum(axis=0).astype(np.int64)
        if spec.reinsert_defaults:
            defaulted = counts[year, : h - 1, h - 1].astype(np.int64)
            pop[: h - 1] += defaulted
            pop[h - 1] -= defaulted.sum()
    return ObservationSet.from_counts(counts, dt=1.0)


def one_year_pds(q):
    """One-year default probabilities for every non-default rating."""
    p = linalg.expm(np.asarray(q, dtype=float), 1.0)
    return p[:-1, -1]


def relative_pd_error(q_est, q_true, rating) -> float:
    """Relative error of the one-year default probability of one rating."""
    pd_true = float(one_year_pds(q_true)[rating])
    if pd_true <= 0:
        raise ZeroTruePd(f"rating {rating} has zero true default probability")
    pd_est = float(one_year_pds(q_est)[rating])
    return abs(pd_est - pd_true) / pd_true


def _mean_tpm_log(obs: ObservationSet):
    return linalg.logm(np.asarray(obs.mean_tpm())).real


def estimate_with_method(method, obs: ObservationSet, em_config=None, mcmc_config=None, seed=0):
    """Dispatch one estimator; returns (GeneratorMatrix | None, status)."""
    if method == "em":
        return estimate_em(obs, em_config or EmConfig()).estimate, "ok"
    if method == "da":
        return diagonal_adjustment(_mean_tpm_log(obs)), "ok"
    if method == "wa":
        return weighted_adjustment(_mean_tpm_log(obs)), "ok"
    if method == "qog":
        return qog(_mean_tpm_log(obs)), "ok"
    if method in MCMC_METHODS:
        cfg = mcmc_config or McmcConfig()
        if cfg.seed != seed:
            cfg = McmcConfig(
                runs=cfg.runs, burn_in=cfg.burn_in, seed=seed,
                max_rejection_attempts=cfg.max_rejection_attempts,
                budget_first10=cfg.budget_first10, budget_total=cfg.budget_total,
            )
        sampler = {
            "mcmc-bs05": gibbs_estimate,
            "mcmc-bs09": importance_estimate,
            "mcmc-mode": mode_estimate,
        }[method]
        estimate, chain = sampler(obs, cfg=cfg)
        return estimate, ("ok" if estimate is not None else "no_result")
    raise ValueError(f"unknown method {method!r}")


def _score(method, seed, obligors, q_true, estimate, seconds, status):
    h = np.asarray(q_true).shape[0]
    if estimate is None:
        nan = (float("nan"),) * (h - 1)
        return BenchmarkRecord(method, seed, obligors, float("nan"), nan, nan, seconds, status)
    err = float(np.linalg.norm(np.asarray(estimate) - np.asarray(q_true)))
    pds_true = one_year_pds(q_true)
    pds_est = one_year_pds(estimate)
    pd_errors = tuple(
        float(abs(pds_est[r] - pds_true[r]) / pds_true[r]) if pds_true[r] > 0 else float("nan")
        for r in range(h - 1)
    )
    return BenchmarkRecord(
        method, seed, obligors, err, pd_errors, tuple(map(float, pds_est)), seconds, status
    )


def _benchmark_task(args):
    spec, seed, obligors, methods, em_config, mcmc_config = args
    obs = simulate_tpm_series(spec, seed, obligors)
    records = []
    for method in methods:
        t0 = time.perf_counter()
        try:
            estimate, status = estimate_with_method(
                method, obs, em_config=em_config, mcmc_config=mcmc_config, seed=seed
            )
        except CtmcgenError as exc:
            estimate, status = None, f"failed: {type(exc).__name__}"
        seconds = time.perf_counter() - t0
        records.append(
            _score(method, seed, obligors, spec.true_generator, estimate, seconds, status)
        )
    return records


def run_benchmark(spec: SimSpec, methods, em_config=None, mcmc_config=None, n_workers=1):
    """Full sweep over obligor levels, seeds and methods.

    All methods of one (seed, level) cell see the same simulated data.
    Tasks carry their own seeds, so results are identical for any worker
    count; wall times are measured per estimator call.
    """
    methods = tuple(methods)
    for m in methods:
        if m not in ALL_METHODS:
            raise ValueError(f"unknown method {m!r}")
    tasks = [
        (spec, seed, level, methods, em_config, mcmc_config)
        for level in np.atleast_1d(spec.obligors_per_rating)
        for seed in spec.seeds
    ]
    records = []
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for chunk in pool.map(_benchmark_task, tasks):
                records.extend(chunk)
    else:
        for task in tasks:
            records.extend(_benchmark_task(task))
    return records


def summarize_benchmark(records, q_true=None):
    """Seed-averaged summary per (method, obligor level).

    Reports mean generator error and wall time over successful seeds, plus
    two default-probability views: the mean of per-seed relative errors and
    the relative error of the seed-averaged TPM (the convention used for
    published comparisons), the latter only when the truth is supplied.
    """
    cells = {}
    for rec in records:
        cells.setdefault((rec.method, int(rec.obligors)), []).append(rec)
    summary = []
    for (method, obligors), recs in sorted(cells.items()):
        ok = [r for r in recs if r.status == "ok"]
        entry = {
            "method": method,
            "obligors": obligors,
            "n_seeds": len(recs),
            "n_ok": len(ok),
            "statuses": sorted({r.status for r in recs}),
        }
        if ok:
            entry["mean_euclid_error"] = float(np.mean([r.euclid_error for r in ok]))
            entry["mean_seconds"] = float(np.mean([r.seconds for r in ok]))
            entry["mean_pd_rel_error"] = [
                float(np.nanmean([r.pd_errors[i] for r in ok]))
                for i in range(len(ok[0].pd_errors))
            ]
            if q_true is not None:
                pds_true = one_year_pds(q_true)
                avg_pd = np.mean([r.pd_estimates for r in ok], axis=0)
                entry["avg_tpm_pd_rel_error"] = [
                    float(abs(avg_pd[i] - pds_true[i]) / pds_true[i]) if pds_true[i] > 0 else None
                    for i in range(avg_pd.size)
                ]
        summary.append(entry)
    return summary


def write_benchmark_csv(records, path, ratings=None):
    """One CSV row per benchmark record; PD errors in rating order."""
    records = list(records)
    n_ratings = len(records[0].pd_errors) if records else 0
    labels = list(ratings[:n_ratings]) if ratings else [f"state{i}" for i in range(n_ratings)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "seed", "obligors", "euclid_error"]
            + [f"pd_rel_error_{r}" for r in labels]
            + ["seconds", "status"]
        )
        for rec in records:
            writer.writerow(
                [rec.method, rec.seed, rec.obligors, repr(rec.euclid_error)]
                + [repr(e) for e in rec.pd_errors]
                + [repr(rec.seconds), rec.status]
            )


def write_benchmark_summary(summary, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
