#!/usr/bin/env python3
"""Estimate a rating-transition generator from one annual TPM.

Walks through the full EM workflow on the built-in sample matrix: build an
observation set from the TPM and a company count per rating, run the EM
iteration, inspect convergence, and attach normal-theory confidence
intervals from the closed-form Hessian.
"""

import numpy as np

from ctmcgen import (
    EmConfig,
    ObservationSet,
    confidence_intervals,
    estimate_em,
    hessian_at,
    identifiability_check,
)
from ctmcgen.datasets import RATINGS, sample_annual_tpm

np.set_printoptions(precision=4, suppress=True, linewidth=140)

# one year of observed migrations for 250 companies per rating
tpm = sample_annual_tpm()
obs = ObservationSet.from_tpms([tpm], obligors=[250] * 7 + [0], dt=1.0)

print("observed annual TPM:")
print(np.asarray(tpm))

report = estimate_em(obs, EmConfig(tol_param=1e-9, tol_loglik=1e-16, max_iter=2000))
print(f"\nEM status: {report.status} after {report.iterations} iterations")
print(f"log-likelihood: {report.loglik_trace[0]:.4f} -> {report.loglik_trace[-1]:.4f}")
print("\nestimated generator (intensities per year):")
print(np.asarray(report.estimate))

diag = identifiability_check(report.estimate, obs.dt)
print(
    f"\ncrude identifiability check: min diagonal of P(1) = {diag.min_diagonal:.4f} "
    f"({'passes' if diag.passed else 'inconclusive'}; threshold 1/2)"
)

hess = hessian_at(report.estimate, obs)
print(
    f"Hessian eigenvalues in [{hess.eigen_min:.1f}, {hess.eigen_max:.1f}] "
    f"-> {'local maximum' if hess.is_local_maximum else 'not a maximum'}"
)

print("\n95% confidence intervals (entries whose interval crosses zero are starred):")
for (i, j), lo, hi in confidence_intervals(hess, report.estimate):
    star = " *" if lo < 0 <= hi else ""
    q_ij = np.asarray(report.estimate)[i, j]
    print(f"  {RATINGS[i]:>3} -> {RATINGS[j]:<3} {q_ij:8.5f}  [{lo:8.5f}, {hi:8.5f}]{star}")
