"""Domain types for intensity matrices, TPMs and observation sets.

Conventions used throughout the package:

* states are 0-indexed, state ``h-1`` is the absorbing default state;
* intensities are per year, observation spacing ``dt`` is in years;
* value types are immutable; every operation is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    AbsorbingStateQuery,
    InvalidMatrix,
    InvalidTransitionMatrix,
    NegativeOffDiagonal,
    NonAbsorbingLastRow,
    NonzeroRowSum,
)

GENERATOR_ROW_SUM_TOL = 1e-12
TPM_ROW_SUM_TOL = 1e-9
TINY_NEGATIVE = 1e-14


@dataclass(frozen=True)
class Violation:
    """One generator-constraint violation: which entry and by how much."""

    kind: str
    row: int
    col: int
    amount: float

    def __str__(self):
        return f"{self.kind} at ({self.row}, {self.col}): {self.amount:.6e}"


def _clean_generator_array(raw):
    """Copy with sub-roundoff constraint violations zeroed; no repairs beyond that."""
    q = np.array(raw, dtype=float, copy=True)
    off = ~np.eye(q.shape[0], dtype=bool)
    tiny = off & (q < 0) & (q >= -TINY_NEGATIVE)
    q[tiny] = 0.0
    diag = np.diag(q)
    np.fill_diagonal(q, np.where((diag > 0) & (diag <= TINY_NEGATIVE), 0.0, diag))
    q[-1, np.abs(q[-1]) <= TINY_NEGATIVE] = 0.0
    return q


def generator_violations(raw):
    """All generator-constraint violations of a raw square matrix.

    Checks the three defining conditions (nonnegative off-diagonals,
    nonpositive diagonal, zero row sums) plus the absorbing last row.
    """
    q = _clean_generator_array(raw)
    h = q.shape[0]
    violations = []
    for i in range(h):
        for j in range(h):
            if i != j and q[i, j] < 0:
                violations.append(Violation("negative off-diagonal", i, j, q[i, j]))
        if q[i, i] > 0:
            violations.append(Violation("positive diagonal", i, i, q[i, i]))
        row_sum = q[i].sum()
        if abs(row_sum) > GENERATOR_ROW_SUM_TOL:
            violations.append(Violation("nonzero row sum", i, -1, row_sum))
    if np.any(q[-1] != 0.0):
        j = int(np.argmax(np.abs(q[-1])))
        violations.append(Violation("non-absorbing last row", h - 1, j, q[-1, j]))
    return violations


@dataclass(frozen=True)
class GeneratorMatrix:
    """Stable-conservative intensity matrix with an absorbing last state."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        v.setflags(write=False)

    @property
    def dim(self):
        return self.values.shape[0]

    @property
    def intensities(self):
        """Total transition rate out of each state, q_i = -q_ii."""
        return -np.diag(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.values, dtype=dtype)

    def offdiag_mask(self):
        return ~np.eye(self.dim, dtype=bool)


def validate_generator(raw):
    """Validate a raw square matrix as a generator or raise with details.

    The raised error subclass matches the first violation kind; the full
    violation list rides along on the exception.
    """
    q = np.asarray(raw, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise InvalidMatrix(f"generator must be square, got shape {q.shape}")
    if q.shape[0] < 2:
        raise InvalidMatrix("generator needs at least two states")
    if not np.all(np.isfinite(q)):
        raise InvalidMatrix("generator contains non-finite entries")
    violations = generator_violations(q)
    if violations:
        by_kind = {
            "negative off-diagonal": NegativeOffDiagonal,
            "non-absorbing last row": NonAbsorbingLastRow,
        }
        raise by_kind.get(violations[0].kind, NonzeroRowSum)(violations)
    return GeneratorMatrix(_clean_generator_array(q))


def generator_from_offdiagonals(off):
    """Generator with the given off-diagonal rates, diagonal balancing rows.

    The last row is forced to zero (absorbing default).
    """
    q = np.array(off, dtype=float, copy=True)
    np.fill_diagonal(q, 0.0)
    q[q < 0] = 0.0
    q[-1, :] = 0.0
    np.fill_diagonal(q, -q.sum(axis=1))
    return validate_generator(q)


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix over rating states with an absorbing last row."""

    values: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        v.setflags(write=False)

    @property
    def dim(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.values, dtype=dtype)


def validate_tpm(raw, dt=1.0, renormalize=False):
    """Validate (optionally renormalizing rows) a raw matrix as a TPM.

    Renormalization divides each row by its sum, the standard repair for
    published matrices whose rows miss 1 by rounding.  It is explicit and
    off by default; without it rows must sum to 1 within 1e-9.
    """
    p = np.array(raw, dtype=float, copy=True)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise InvalidTransitionMatrix(f"TPM must be square, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidTransitionMatrix("TPM contains non-finite entries")
    tiny = (p < 0) & (p >= -TINY_NEGATIVE)
    p[tiny] = 0.0
    if p.min() < 0:
        i, j = np.unravel_index(np.argmin(p), p.shape)
        raise InvalidTransitionMatrix(f"negative probability {p[i, j]:.3e} at ({i}, {j})")
    if renormalize:
        sums = p.sum(axis=1, keepdims=True)
        if np.any(sums <= 0):
            raise InvalidTransitionMatrix("cannot renormalize a row with zero mass")
        p = p / sums
    sums = p.sum(axis=1)
    bad = np.abs(sums - 1.0) > TPM_ROW_SUM_TOL
    if np.any(bad):
        i = int(np.argmax(np.abs(sums - 1.0)))
        raise InvalidTransitionMatrix(f"row {i} sums to {sums[i]!r}, not 1")
    h = p.shape[0]
    last = np.zeros(h)
    last[-1] = 1.0
    if np.max(np.abs(p[-1] - last)) > TPM_ROW_SUM_TOL:
        raise InvalidTransitionMatrix("last row is not the absorbing unit row")
    p[-1] = last
    if dt <= 0:
        raise InvalidTransitionMatrix(f"observation spacing must be positive, got {dt}")
    return TransitionMatrix(p, float(dt))


def largest_remainder_round(targets, total):
    """Integer vector summing to ``total``, closest to ``targets`` entrywise.

    Floors every target and hands the remaining units to the largest
    fractional remainders; ties resolve by index order, so the result is
    deterministic.
    """
    targets = np.asarray(targets, dtype=float)
    floors = np.floor(targets).astype(np.int64)
    missing = int(round(total - floors.sum()))
    if missing < 0:
        raise ValueError("targets exceed the requested total")
    remainders = targets - floors
    order = np.lexsort((np.arange(targets.size), -remainders))
    out = floors.copy()
    out[order[:missing]] += 1
    return out


@dataclass(frozen=True)
class ObservationSet:
    """Sequence of annual-style TPM observations with obligor counts.

    ``counts[u, s, r]`` is the number of companies observed to move from
    state ``s`` to state ``r`` in observation window ``u``; row sums equal
    the per-window, per-state obligor counts ``obligors[u, s]``.
    """

    dt: float
    tpms: tuple
    obligors: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        obligors = np.asarray(self.obligors, dtype=float)
        counts = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, "tpms", tuple(self.tpms))
        object.__setattr__(self, "obligors", obligors)
        object.__setattr__(self, "counts", counts)
        obligors.setflags(write=False)
        counts.setflags(write=False)
        if len(self.tpms) < 1:
            raise InvalidTransitionMatrix("observation set needs at least one TPM")
        h = self.tpms[0].dim
        if any(t.dim != h for t in self.tpms):
            raise InvalidTransitionMatrix("all TPMs must share one dimension")
        if any(t.dt != self.dt for t in self.tpms):
            raise InvalidTransitionMatrix("all TPMs must share the observation spacing")
        if counts.shape != (len(self.tpms), h, h):
            raise InvalidTransitionMatrix(
                f"counts shape {counts.shape} does not match {len(self.tpms)} x {h} x {h}"
            )
        if counts.min() < 0 or obligors.min() < 0:
            raise InvalidTransitionMatrix("counts and obligors must be nonnegative")
        if obligors.shape != (len(self.tpms), h):
            raise InvalidTransitionMatrix("obligors must have one row per observation window")
        if not np.allclose(counts.sum(axis=2), obligors, rtol=0, atol=1e-9):
            raise InvalidTransitionMatrix("count row sums do not match obligor counts")

    @property
    def dim(self):
        return self.tpms[0].dim

    @property
    def n_windows(self):
        return len(self.tpms)

    def total_counts(self):
        """Transition counts summed over all observation windows."""
        return self.counts.sum(axis=0)

    def occupancy(self):
        """Observed company-windows per starting state, summed over windows."""
        return self.obligors.sum(axis=0)

    def mean_tpm(self):
        """Element-wise average of the observed TPMs."""
        avg = np.mean([t.values for t in self.tpms], axis=0)
        return validate_tpm(avg, dt=self.dt)

    def has_integer_counts(self):
        return bool(np.allclose(self.counts, np.round(self.counts), rtol=0, atol=1e-9))

    @classmethod
    def from_tpms(cls, tpms, obligors, dt=1.0, renormalize=False, exact=False):
        """Build an observation set from TPMs and per-rating obligor counts.

        ``obligors`` is one count per rating shared by all windows (or a
        per-window array).  Counts are the largest-remainder rounding of
        ``M_i * P_ij`` row by row; ``exact=True`` keeps the fractional
        products instead, for idealized large-sample analyses.
        """
        typed = []
        for t in tpms:
            if isinstance(t, TransitionMatrix):
                if t.dt != dt:
                    t = TransitionMatrix(t.values, dt)
                typed.append(t)
            else:
                typed.append(validate_tpm(t, dt=dt, renormalize=renormalize))
        n = len(typed)
        h = typed[0].dim
        obligors = np.asarray(obligors, dtype=float)
        if obligors.ndim == 1:
            obligors = np.tile(obligors, (n, 1))
        counts = np.zeros((n, h, h))
        for u, t in enumerate(typed):
            for i in range(h):
                m = obligors[u, i]
                if exact:
                    counts[u, i] = m * t.values[i]
                elif m > 0:
                    counts[u, i] = largest_remainder_round(m * t.values[i], int(round(m)))
        return cls(dt=dt, tpms=typed, obligors=obligors, counts=counts)

    @classmethod
    def from_counts(cls, counts, dt=1.0):
        """Build an observation set from per-window transition counts.

        Empirical TPM rows are ``counts / row_total``; rows with no
        observed companies fall back to the no-movement unit row so the
        matrix stays stochastic (they carry zero weight in estimation).
        """
        counts = np.asarray(counts, dtype=float)
        n, h, _ = counts.shape
        obligors = counts.sum(axis=2)
        tpms = []
        for u in range(n):
            p = np.eye(h)
            rows = obligors[u] > 0
            p[rows] = counts[u, rows] / obligors[u, rows, None]
            p[-1] = 0.0
            p[-1, -1] = 1.0
            tpms.append(validate_tpm(p, dt=dt))
        return cls(dt=dt, tpms=tpms, obligors=obligors, counts=counts)


def transition_matrix(q, t):
    """TPM over horizon ``t`` implied by a generator: ``e^{q t}``."""
    if t <= 0:
        raise InvalidMatrix(f"horizon must be positive, got {t}")
    p = linalg.expm(np.asarray(q, dtype=float), t)
    return validate_tpm(p, dt=t)


def pd_curve(q, rating, grid):
    """Cumulative default probabilities of one rating over a time grid."""
    q = np.asarray(q, dtype=float)
    h = q.shape[0]
    if rating == h - 1:
        raise AbsorbingStateQuery("default probabilities of the default state are trivially 1")
    if not 0 <= rating < h - 1:
        raise InvalidMatrix(f"rating index {rating} out of range for {h} states")
    grid = np.asarray(grid, dtype=float)
    if grid.size and (grid.min() < 0 or np.any(np.diff(grid) < 0)):
        raise InvalidMatrix("time grid must be nonnegative and ascending")
    return np.array([linalg.expm(q, t)[rating, h - 1] for t in grid])


@dataclass(frozen=True)
class IdentifiabilityReport:
    """Crude sufficient check that the generator is identifiable from P(t)."""

    min_diagonal: float
    state: int
    threshold: float = 0.5

    @property
    def passed(self):
        return self.min_diagonal > self.threshold


def identifiability_check(q, t):
    """Diagonal-dominance diagnostic on ``e^{q t}``; never blocks estimation."""
    p = linalg.expm(np.asarray(q, dtype=float), t)
    diag = np.diag(p)
    state = int(np.argmin(diag))
    return IdentifiabilityReport(min_diagonal=float(diag[state]), state=state)
