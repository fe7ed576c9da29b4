"""Monte Carlo risk charges under a one-factor credit-metrics migration model.

A scenario draws one systematic factor shared by every position plus an
idiosyncratic shock per position; the resulting normalized asset return is
mapped to a horizon rating through Gaussian thresholds calibrated to the
horizon TPM.  Default loses the full notional (zero recovery); for the
mark-to-market measures a migrated survivor is revalued as a one-year par
instrument discounted at its new rating's yield over the remaining life.
That revaluation scheme is a documented stand-in (regulatory texts do not
pin one down) and is isolated in ``position_loss_table`` for substitution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from . import linalg
from .datasets import RATINGS, rating_index, yields_vector
from .errors import InvalidMatrix

SMALL_SAMPLE_WARNING = 10**5

#: measure -> (horizon years, confidence, use expected shortfall, mark to market)
MEASURES = {
    "irc": (0.25, 0.999, False, True),
    "idr": (1.0, 0.999, False, False),
    "irc-es": (0.25, 0.975, True, True),
}


@dataclass(frozen=True)
class Portfolio:
    """Bond positions as (rating index, notional) pairs."""

    positions: tuple
    name: str = "custom"

    def __post_init__(self):
        positions = tuple((int(r), float(n)) for r, n in self.positions)
        object.__setattr__(self, "positions", positions)
        for r, n in positions:
            if n < 0:
                raise ValueError(f"negative notional {n}")
            if r < 0:
                raise ValueError(f"negative rating index {r}")

    @property
    def ratings(self):
        return np.array([r for r, _ in self.positions], dtype=np.int64)

    @property
    def notionals(self):
        return np.array([n for _, n in self.positions])

    @classmethod
    def from_mapping(cls, table, name="custom"):
        """Build from {rating label or index: [notionals...]}."""
        positions = []
        for key, sizes in table.items():
            idx = rating_index(key) if isinstance(key, str) else int(key)
            positions.extend((idx, float(n)) for n in np.atleast_1d(sizes))
        return cls(tuple(positions), name=name)


@dataclass(frozen=True)
class RiskSpec:
    """Which charge to compute and at what scale."""

    measure: str = "irc"
    sims: int = 1_500_000
    yields: np.ndarray | None = None
    n_batches: int = 10

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}; use one of {sorted(MEASURES)}")
        if self.sims < 1:
            raise ValueError("need at least one simulation")
        if self.yields is not None:
            object.__setattr__(self, "yields", np.asarray(self.yields, dtype=float))

    @property
    def horizon(self):
        return MEASURES[self.measure][0]

    @property
    def confidence(self):
        return MEASURES[self.measure][1]

    @property
    def expected_shortfall(self):
        return MEASURES[self.measure][2]

    @property
    def mark_to_market(self):
        return MEASURES[self.measure][3]

    def yields_array(self, h):
        if self.yields is not None:
            return self.yields
        y = yields_vector()
        if y.size != h - 1:
            raise InvalidMatrix(f"built-in yields cover {y.size + 1} states, generator has {h}")
        return y


def asset_correlation(pd_one_year):
    """Regulatory interpolation between 0.24 (riskless) and 0.12 (certain default)."""
    pd_one_year = np.asarray(pd_one_year, dtype=float)
    blend = (1.0 - np.exp(-50.0 * pd_one_year)) / (1.0 - np.exp(-50.0))
    return 0.12 * blend + 0.24 * (1.0 - blend)


@dataclass(frozen=True)
class MigrationModel:
    """Gaussian rating-migration thresholds plus factor loadings.

    ``thresholds[i]`` holds the ``h-1`` ascending cutpoints of current
    rating ``i``: an asset return below the first lands in default, between
    consecutive cutpoints in successively better ratings.  Point-mass rows
    degenerate to ``+/-inf`` cutpoints and never misroute a draw.
    """

    tpm: np.ndarray
    thresholds: np.ndarray
    betas: np.ndarray
    horizon: float

    def migrate(self, current_rating, z):
        """Map asset returns to horizon rating indices for one position."""
        t = self.thresholds[current_rating]
        k = np.searchsorted(t, z, side="right")
        return t.shape[0] - k


def build_migration_model(q, horizon) -> MigrationModel:
    """Thresholds from the horizon TPM, loadings from the one-year PDs."""
    qa = np.asarray(q, dtype=float)
    if horizon <= 0:
        raise InvalidMatrix(f"horizon must be positive, got {horizon}")
    h = qa.shape[0]
    tpm = linalg.expm(qa, horizon)
    # cumulative mass of the worst k outcomes, worst -> best
    cum = np.cumsum(tpm[:, ::-1], axis=1)
    with np.errstate(divide="ignore"):
        thresholds = norm.ppf(np.clip(cum[:, : h - 1], 0.0, 1.0))
    betas = asset_correlation(linalg.expm(qa, 1.0)[:, -1])
    return MigrationModel(tpm=tpm, thresholds=thresholds, betas=betas, horizon=float(horizon))


def position_loss_table(rating, notional, yields, horizon, mark_to_market):
    """Loss per horizon rating for one position (index = new rating).

    Default always loses the notional.  Under mark-to-market, a position is
    a one-year par instrument promising ``notional * (1 + y_old)``; at the
    horizon its value discounts that payoff at the new rating's yield over
    the remaining life, and the loss is the value change against staying.
    """
    h = yields.size + 1
    table = np.zeros(h)
    table[h - 1] = notional
    if mark_to_market:
        remaining = 1.0 - horizon
        payoff = notional * (1.0 + yields[rating])
        value_now = payoff / (1.0 + yields[rating]) ** remaining
        values = payoff / (1.0 + yields) ** remaining
        table[: h - 1] = value_now - values
    return table


def var_es_from_losses(losses, confidence):
    """Order-statistic VaR and beyond-the-quantile ES of a loss sample.

    VaR is the ``ceil(confidence * n)``-th smallest loss (no interpolation);
    ES averages the losses strictly beyond that order statistic, so
    ``ES >= VaR`` holds exactly on any sample.
    """
    losses = np.sort(np.asarray(losses, dtype=float))
    n = losses.size
    k = int(np.ceil(confidence * n))
    var = float(losses[k - 1])
    es = float(losses[k:].mean()) if k < n else var
    return var, es


def risk_charge(q, portfolio: Portfolio, spec: RiskSpec, seed=0):
    """Monte Carlo risk charge and its batch standard error.

    Scenario batches use independent RNG streams spawned from the seed, so
    the result is reproducible for a fixed seed and batch count.
    """
    qa = np.asarray(q, dtype=float)
    h = qa.shape[0]
    ratings = portfolio.ratings
    if ratings.size and ratings.max() >= h - 1:
        raise InvalidMatrix("portfolio holds a position in the default state")
    if spec.sims < SMALL_SAMPLE_WARNING:
        warnings.warn(f"{spec.sims} simulations is small for a {spec.confidence:.3%} tail")
    model = build_migration_model(qa, spec.horizon)
    yields = spec.yields_array(h)
    tables = np.array(
        [
            position_loss_table(r, n, yields, spec.horizon, spec.mark_to_market)
            for r, n in portfolio.positions
        ]
    )
    betas = model.betas[ratings]
    resid = np.sqrt(1.0 - betas**2)
    sizes = [len(a) for a in np.array_split(np.arange(spec.sims), spec.n_batches)]
    streams = np.random.SeedSequence(seed).spawn(spec.n_batches)
    batch_charges = []
    losses_all = []
    for size, stream in zip(sizes, streams):
        rng = np.random.default_rng(stream)
        x = rng.standard_normal(size)
        eps = rng.standard_normal((size, ratings.size))
        z = betas[None, :] * x[:, None] + resid[None, :] * eps
        loss = np.zeros(size)
        for p in range(ratings.size):
            new_rating = model.migrate(ratings[p], z[:, p])
            loss += tables[p, new_rating]
        losses_all.append(loss)
        var, es = var_es_from_losses(loss, spec.confidence)
        batch_charges.append(es if spec.expected_shortfall else var)
    losses = np.concatenate(losses_all)
    var, es = var_es_from_losses(losses, spec.confidence)
    charge = es if spec.expected_shortfall else var
    std_error = float(np.std(batch_charges, ddof=1) / np.sqrt(len(batch_charges)))
    return float(charge), std_error


def risk_error(estimates, true_charge):
    """Mean absolute deviation of charge estimates, relative to the truth.

    With a zero true charge the relative form is undefined and the mean
    absolute money difference is reported instead.
    """
    estimates = np.asarray(estimates, dtype=float)
    mad = float(np.mean(np.abs(estimates - true_charge)))
    if true_charge > 0:
        return mad / float(true_charge)
    return mad
