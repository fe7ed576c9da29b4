#!/usr/bin/env python3
"""Masked-generator benchmark: how fast does each estimator converge?

A known generator is hidden behind multinomially simulated annual TPMs at
two information levels (companies per rating); every estimator is scored by
generator distance and one-year default-probability error, averaged over
seeds.  A full-size version of this study backs the CLI `benchmark`
subcommand; this demo keeps the obligor grid and the MCMC chains short so
it finishes in a few minutes.
"""

import numpy as np

from ctmcgen import SimSpec, run_benchmark, summarize_benchmark
from ctmcgen.datasets import unstable_generator
from ctmcgen.mcmc import McmcConfig
from ctmcgen.simulate import write_benchmark_csv, write_benchmark_summary

truth = unstable_generator()
spec = SimSpec(
    true_generator=truth,
    years=4,
    obligors_per_rating=(100, 1000),
    seeds=tuple(range(3)),
)
methods = ("em", "da", "wa", "qog", "mcmc-bs09")
print(f"running {len(spec.seeds)} seeds x {len(spec.obligors_per_rating)} levels x {len(methods)} methods...")
records = run_benchmark(spec, methods, mcmc_config=McmcConfig(runs=600, burn_in=100))

write_benchmark_csv(records, "benchmark_records.csv")
summary = summarize_benchmark(records, truth)
write_benchmark_summary(summary, "benchmark_summary.json")
print("wrote benchmark_records.csv, benchmark_summary.json\n")

print(f"{'method':12s}{'obligors':>9s}{'mean |Q-Q*|':>13s}{'mean seconds':>14s}")
for entry in summary:
    print(
        f"{entry['method']:12s}{entry['obligors']:9d}"
        f"{entry['mean_euclid_error']:13.4f}{entry['mean_seconds']:14.3f}"
    )
print("\nmore companies help every method; the EM matches the deterministic")
print("repairs at low information and pulls ahead as information grows,")
print("at a fraction of the MCMC wall time.")
