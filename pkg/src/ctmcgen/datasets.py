"""Built-in rating-scale data: reference generators, a sample TPM, portfolios.

The two reference generators describe the same eight-state rating scale
under different market conditions: the "unstable" one (financial stress)
has more and larger transition rates than the "stable" one (financial
calm).  Diagonals are recomputed from the off-diagonal rates so the row
sums vanish exactly; published sources round entries independently, which
leaves residuals as large as 1e-3.
"""

from __future__ import annotations

import numpy as np

from .core import GeneratorMatrix, TransitionMatrix, generator_from_offdiagonals, validate_tpm

RATINGS = ("AAA", "AA", "A", "BBB", "BB", "B", "C", "D")

_UNSTABLE_OFFDIAG = [
    [0.0, 0.085881, 0.04549, 0.015, 0.0, 0.0, 0.0, 0.0],
    [0.018506, 0.0, 0.114831, 0.033, 0.0, 0.0, 0.0, 0.0],
    [0.0276, 0.047012, 0.0, 0.09043, 0.023001, 0.01, 0.0, 0.0],
    [0.011469, 0.010734, 0.088133, 0.0, 0.077569, 0.044407, 0.010734, 0.0],
    [0.0, 0.0, 0.019159, 0.184699, 0.0, 0.106166, 0.013053, 0.0],
    [0.0, 0.0, 0.012280, 0.034822, 0.093489, 0.0, 0.134273, 0.022401],
    [0.0, 0.0, 0.0, 0.0, 0.02, 0.140209, 0.0, 0.440730],
    [0.0] * 8,
]

_STABLE_OFFDIAG = [
    [0.0, 0.055881, 0.005490, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.013506, 0.0, 0.074831, 0.008, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.037012, 0.0, 0.06043, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.000734, 0.058133, 0.0, 0.057569, 0.004407, 0.0, 0.0],
    [0.0, 0.0, 0.009159, 0.104699, 0.0, 0.076166, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.024822, 0.083489, 0.0, 0.064273, 0.002401],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.080209, 0.0, 0.220730],
    [0.0] * 8,
]

# annual TPM observed on the same scale; BB and B rows miss 1 by 1e-4 in the
# published source and are renormalized on construction
_SAMPLE_TPM = [
    [0.8824, 0.1176, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0064, 0.9111, 0.0813, 0.0008, 0.0001, 0.0, 0.0003, 0.0],
    [0.0003, 0.0559, 0.8836, 0.0499, 0.0079, 0.0015, 0.0002, 0.0007],
    [0.0, 0.0116, 0.1585, 0.7640, 0.0528, 0.0070, 0.0, 0.0061],
    [0.0, 0.0, 0.0213, 0.1193, 0.7746, 0.0623, 0.0099, 0.0127],
    [0.0, 0.0, 0.0062, 0.0199, 0.1669, 0.7017, 0.0730, 0.0322],
    [0.0, 0.0, 0.0, 0.0, 0.0417, 0.2083, 0.4544, 0.2956],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
]

#: annual par yields per non-default rating (Moody's-based)
RATING_YIELDS = {
    "AAA": 0.0265,
    "AA": 0.0269,
    "A": 0.0278,
    "BBB": 0.0293,
    "BB": 0.0318,
    "B": 0.0545,
    "C": 0.1239,
}

_MIXED_POSITIONS = {
    "AAA": [100, 500, 1500, 750],
    "AA": [200, 750, 2000, 650],
    "A": [150, 400, 400],
    "BBB": [300, 500, 150, 1500],
    "BB": [500, 250, 700],
    "B": [200, 500],
    "C": [100, 150, 200],
}

_INVESTMENT_POSITIONS = {
    "AAA": [1000, 500, 1500, 1500],
    "AA": [100, 400, 750, 2000, 400, 1500],
    "A": [150, 100, 800, 400, 200],
}

_SPECULATIVE_POSITIONS = {
    "BB": [1000, 150, 100, 800, 1500],
    "B": [100, 300, 400, 750, 2000, 1500],
    "C": [400, 500, 400, 1000],
}


def unstable_generator() -> GeneratorMatrix:
    """Reference stress-regime generator (higher, denser transition rates)."""
    return generator_from_offdiagonals(_UNSTABLE_OFFDIAG)


def stable_generator() -> GeneratorMatrix:
    """Reference calm-regime generator (lower, sparser transition rates)."""
    return generator_from_offdiagonals(_STABLE_OFFDIAG)


def sample_annual_tpm() -> TransitionMatrix:
    """Non-embeddable annual TPM used by the worked examples."""
    return validate_tpm(np.array(_SAMPLE_TPM), dt=1.0, renormalize=True)


def rating_index(label):
    return RATINGS.index(label)


def yields_vector():
    """Yields as an array over non-default ratings, in rating order."""
    return np.array([RATING_YIELDS[r] for r in RATINGS[:-1]])


def _positions(table):
    return tuple((rating_index(r), float(n)) for r, sizes in table.items() for n in sizes)


def mixed_portfolio():
    from .risk import Portfolio

    return Portfolio(_positions(_MIXED_POSITIONS), name="mixed")


def investment_portfolio():
    from .risk import Portfolio

    return Portfolio(_positions(_INVESTMENT_POSITIONS), name="investment")


def speculative_portfolio():
    from .risk import Portfolio

    return Portfolio(_positions(_SPECULATIVE_POSITIONS), name="speculative")
