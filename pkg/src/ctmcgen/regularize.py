"""Deterministic repairs of a matrix logarithm into a valid generator.

All three methods take the real part of the principal logarithm of a TPM
(rows summing to zero up to roundoff) and return a generator.  They differ
in how they dispose of negative off-diagonal mass: diagonal adjustment dumps
it on the diagonal, weighted adjustment spreads it across the row, and the
quasi-optimization projects each row onto the generator constraint set in
Euclidean norm, which dominates both by construction.
"""

from __future__ import annotations

import logging

import numpy as np

from .core import GeneratorMatrix, validate_generator
from .errors import InvalidMatrix

log = logging.getLogger(__name__)


def _as_log_matrix(raw):
    a = np.asarray(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"log-matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("log-matrix contains non-finite entries")
    return a


def diagonal_adjustment(raw) -> GeneratorMatrix:
    """Clamp negative off-diagonals to zero, rebalance each diagonal."""
    a = _as_log_matrix(raw)
    q = a.copy()
    off = ~np.eye(a.shape[0], dtype=bool)
    q[off & (q < 0)] = 0.0
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    q[-1, :] = 0.0
    return validate_generator(q)


def weighted_adjustment(raw) -> GeneratorMatrix:
    """Clamp negative off-diagonals, rebalance across the whole row.

    Row ``i`` loses its negative mass ``B_i`` proportionally to entry
    magnitude relative to ``G_i = |q_ii| + sum of positive off-diagonals``;
    an all-zero row (``G_i = 0``) is left untouched.
    """
    a = _as_log_matrix(raw)
    h = a.shape[0]
    q = np.zeros_like(a)
    for i in range(h):
        row = a[i]
        off = np.arange(h) != i
        g = abs(row[i]) + np.maximum(row, 0.0)[off].sum()
        b = np.maximum(-row, 0.0)[off].sum()
        if g > 0:
            keep = (row >= 0) | ~off
            q[i, keep] = row[keep] - b * np.abs(row[keep]) / g
        else:
            q[i] = row
    q[-1, :] = 0.0
    return validate_generator(q)


def _project_row(row, diag_index):
    """Euclidean projection onto {sum = 0, entries >= 0 off the diagonal}.

    Active-set iteration: subtract the mean over active coordinates, clamp
    newly negative off-diagonal coordinates to zero and drop them from the
    active set.  The active set only shrinks, so this terminates, and the
    running mean only grows, so clamped coordinates stay clamped; the fixed
    point satisfies the KKT conditions of the projection.
    """
    h = row.size
    g = np.zeros(h)
    active = np.ones(h, dtype=bool)
    work = row.copy()
    while True:
        shift = work[active].mean()
        candidate = work - shift
        bad = active & (candidate < 0)
        bad[diag_index] = False
        if not bad.any():
            g[active] = candidate[active]
            return g
        active &= ~bad
        work[~active] = 0.0
        if not active.any():  # pragma: no cover - diagonal always stays active
            return g


def qog(raw) -> GeneratorMatrix:
    """Row-wise Euclidean projection onto the generator constraint set.

    Rows whose sums stray from zero (roundoff in the upstream logarithm)
    are first shifted onto the zero-sum hyperplane; the shift magnitude is
    logged since it quantifies how far the input was from a log-matrix.
    """
    a = _as_log_matrix(raw)
    h = a.shape[0]
    row_sums = a.sum(axis=1)
    if np.max(np.abs(row_sums)) > 0:
        log.debug("qog pre-projection row-sum adjustments: %s", row_sums)
    a = a - row_sums[:, None] / h
    q = np.zeros_like(a)
    for i in range(h - 1):
        q[i] = _project_row(a[i], i)
    return validate_generator(q)
