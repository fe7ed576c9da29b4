#!/usr/bin/env python3
"""Portfolio risk charges under the one-factor migration model.

Computes the three regulatory-style charges (value-at-risk over a quarter
with mark-to-market, default-only value-at-risk over a year, and expected
shortfall over a quarter) for three stylized portfolios under the calm and
stress reference generators, at a desk-scale simulation count.
"""

from ctmcgen import RiskSpec, risk_charge
from ctmcgen.datasets import (
    investment_portfolio,
    mixed_portfolio,
    speculative_portfolio,
    stable_generator,
    unstable_generator,
)

SIMS = 200_000

portfolios = {
    "mixed": mixed_portfolio(),
    "investment": investment_portfolio(),
    "speculative": speculative_portfolio(),
}
generators = {"stable": stable_generator(), "unstable": unstable_generator()}

print(f"{SIMS} scenarios per cell, seed 0, zero recovery\n")
for measure in ("irc", "idr", "irc-es"):
    print(f"=== {measure.upper()} ===")
    print(f"{'portfolio':12s}{'stable':>16s}{'unstable':>16s}")
    for name, portfolio in portfolios.items():
        row = [name]
        for generator in generators.values():
            charge, se = risk_charge(generator, portfolio, RiskSpec(measure=measure, sims=SIMS), seed=0)
            row.append(f"{charge:10.1f} ({se:5.1f})")
        print(f"{row[0]:12s}{row[1]:>16s}{row[2]:>16s}")
    print()

print("reading the table: the all-investment-grade portfolio is nearly")
print("riskless on a one-year default-only view (zero charge under the calm")
print("generator), while mark-to-market migration risk and the stress")
print("generator push every charge up; expected shortfall at 97.5% sits")
print("below the 99.9% value-at-risk on these loss profiles.")
