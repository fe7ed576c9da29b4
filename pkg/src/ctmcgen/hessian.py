"""Closed-form curvature of the observed-data log-likelihood.

Differentiating the expected-statistics formulas once more in the generator
entries yields every term of the Hessian as a block of the exponential of a
structured 2h-by-2h or 4h-by-4h matrix, so no numerical differentiation is
involved anywhere.  Derivatives are taken along the constrained directions
``e_a e_b^T - e_a e_a^T`` (the diagonal absorbs any off-diagonal change, so
row sums stay zero), and only "allowed" entries, those safely away from the
zero boundary, index the Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .core import ObservationSet
from .em import expected_statistics
from .errors import DisallowedPair, SingularInformation

DEFAULT_CUTOFF = 1e-8
CONDITION_LIMIT = 1e12
Z_95 = 1.96


@dataclass(frozen=True)
class AllowedPairs:
    """Off-diagonal entries large enough to carry curvature information."""

    cutoff: float
    pairs: tuple

    @classmethod
    def from_generator(cls, q, cutoff=DEFAULT_CUTOFF):
        qa = np.asarray(q, dtype=float)
        h = qa.shape[0]
        pairs = tuple(
            (i, j)
            for i in range(h - 1)
            for j in range(h)
            if i != j and qa[i, j] > cutoff
        )
        return cls(cutoff=cutoff, pairs=pairs)

    @property
    def count(self):
        return len(self.pairs)

    def index(self, pair):
        try:
            return self.pairs.index(tuple(pair))
        except ValueError:
            raise DisallowedPair(f"pair {tuple(pair)} is not an allowed entry") from None


@dataclass(frozen=True)
class HessianReport:
    """Hessian, information matrix and normal-theory interval estimates.

    ``variances`` and ``ci95`` are ``None`` when the information matrix is
    numerically singular; no pseudo-inverse stand-ins are fabricated.
    """

    pairs: AllowedPairs
    hessian: np.ndarray
    information: np.ndarray
    condition: float
    eigen_min: float
    eigen_max: float
    variances: np.ndarray | None
    ci95: tuple | None

    @property
    def is_local_maximum(self):
        tol = 1e-10 * max(1.0, abs(self.eigen_min))
        return self.eigen_max < -tol


def _direction(h, a, b):
    """Constrained derivative of the generator in entry (a, b)."""
    d = np.zeros((h, h))
    d[a, b] = 1.0
    d[a, a] -= 1.0
    return d


class _Workspace:
    """Shared exponential blocks for one (generator, observations) pair."""

    def __init__(self, q, obs: ObservationSet, pairs: AllowedPairs):
        self.q = np.asarray(q, dtype=float)
        self.obs = obs
        self.pairs = pairs
        self.h = self.q.shape[0]
        self.dt = obs.dt
        h = self.h
        p = linalg.expm(self.q, self.dt)
        counts = obs.total_counts()
        seen = counts > 0
        self.w1 = np.zeros_like(p)
        self.w2 = np.zeros_like(p)
        self.w1[seen] = counts[seen] / p[seen]
        self.w2[seen] = counts[seen] / p[seen] ** 2
        self.gamma = {}
        self.phi = {}
        self.eta = {}
        self._psi = {}
        self._omega = {}
        for pair in pairs.pairs:
            i, j = pair
            b = np.zeros((h, h))
            b[i, j] = self.q[i, j]
            self.gamma[pair] = linalg.vanloan_integral(self.q, b, self.dt)
            self.eta[pair] = linalg.vanloan_integral(self.q, _direction(h, i, j), self.dt)
        for m in {p[0] for p in pairs.pairs}:
            b = np.zeros((h, h))
            b[m, m] = 1.0
            self.phi[m] = linalg.vanloan_integral(self.q, b, self.dt)

    def _gamma_block(self, pair):
        i, j = pair
        b = np.zeros((self.h, self.h))
        b[i, j] = self.q[i, j]
        return linalg.block_upper(self.q, b)

    def psi(self, a, p):
        """Top-right h-block of the 4h exponential for the jump derivative."""
        key = (a, p)
        if key not in self._psi:
            h = self.h
            d = _direction(h, *a)
            corner = np.zeros((h, h))
            if a == p:
                corner[p[0], p[1]] = 1.0
            inner = linalg.block_upper(d, corner)
            big = linalg.vanloan_integral(self._gamma_block(p), inner, self.dt)
            self._psi[key] = big[:h, h:]
        return self._psi[key]

    def omega(self, a, m):
        """Top-right h-block of the 4h exponential for the holding derivative."""
        key = (a, m)
        if key not in self._omega:
            h = self.h
            d = _direction(h, *a)
            b = np.zeros((h, h))
            b[m, m] = 1.0
            inner = linalg.block_upper(d, np.zeros((h, h)))
            big = linalg.vanloan_integral(linalg.block_upper(self.q, b), inner, self.dt)
            self._omega[key] = big[:h, h:]
        return self._omega[key]

    def mixed_term(self, a, p, q_prime_value):
        """Mixed second derivative of the EM objective for pairs a and p."""
        eta = self.eta[a]
        jump_part = np.sum(self.w1 * self.psi(a, p)) - np.sum(self.w2 * eta * self.gamma[p])
        hold_part = np.sum(self.w1 * self.omega(a, p[0])) - np.sum(self.w2 * eta * self.phi[p[0]])
        return jump_part / q_prime_value - hold_part


def loglik_gradient(q, obs: ObservationSet, pairs: AllowedPairs | None = None):
    """Gradient of the observed-data log-likelihood over the allowed pairs."""
    qa = np.asarray(q, dtype=float)
    pairs = pairs or AllowedPairs.from_generator(qa)
    ws = _Workspace(qa, obs, pairs)
    return np.array([np.sum(ws.w1 * ws.eta[a]) for a in pairs.pairs])


def second_deriv_R(q, q_prime, pair_ab, pair_mn, obs: ObservationSet, pairs: AllowedPairs | None = None):
    """Mixed derivative of the EM objective in one old/new entry pair.

    Differentiates in ``pair_ab`` of the expectation parameters and in
    ``pair_mn`` of the maximand parameters (``q_prime`` supplies the latter
    value).  Both pairs must be allowed.
    """
    qa = np.asarray(q, dtype=float)
    pairs = pairs or AllowedPairs.from_generator(qa)
    a = tuple(pair_ab)
    p = tuple(pair_mn)
    pairs.index(a)
    pairs.index(p)
    ws = _Workspace(qa, obs, pairs)
    return float(ws.mixed_term(a, p, np.asarray(q_prime, dtype=float)[p]))


def hessian_at(q, obs: ObservationSet, cutoff=DEFAULT_CUTOFF) -> HessianReport:
    """Assemble the Hessian over allowed pairs and invert the information.

    The matrix is symmetrized (floating-point asymmetry only) before
    inversion; an information matrix with condition number beyond
    ``CONDITION_LIMIT`` yields absent variances rather than invented ones.
    """
    qa = np.asarray(q, dtype=float)
    pairs = AllowedPairs.from_generator(qa, cutoff)
    if pairs.count == 0:
        raise DisallowedPair("no allowed pairs above the cutoff")
    ws = _Workspace(qa, obs, pairs)
    stats = expected_statistics(qa, obs)
    n = pairs.count
    hess = np.empty((n, n))
    for ia, a in enumerate(pairs.pairs):
        for ip, p in enumerate(pairs.pairs):
            val = ws.mixed_term(a, p, qa[p])
            if a == p:
                val -= stats.jumps[p] / qa[p] ** 2
            hess[ia, ip] = val
    hess = 0.5 * (hess + hess.T)
    information = -hess
    eigvals = np.linalg.eigvalsh(hess)
    condition = float(np.linalg.cond(information))
    variances = None
    ci = None
    if condition <= CONDITION_LIMIT:
        variances = np.diag(np.linalg.inv(information)).copy()
        sd = np.sqrt(np.maximum(variances, 0.0))
        ci = tuple(
            (qa[pair] - Z_95 * s, qa[pair] + Z_95 * s) for pair, s in zip(pairs.pairs, sd)
        )
    return HessianReport(
        pairs=pairs,
        hessian=hess,
        information=information,
        condition=condition,
        eigen_min=float(eigvals[0]),
        eigen_max=float(eigvals[-1]),
        variances=variances,
        ci95=ci,
    )


def confidence_intervals(report: HessianReport, q):
    """Per-entry normal-theory 95% intervals: (pair, lower, upper).

    Intervals may cross zero for entries estimated near the boundary; the
    flag is left to callers.  Raises when the report carries no variances.
    """
    if report.variances is None:
        raise SingularInformation(
            f"information matrix condition {report.condition:.3e} exceeds {CONDITION_LIMIT:g}"
        )
    qa = np.asarray(q, dtype=float)
    out = []
    for pair, var in zip(report.pairs.pairs, report.variances):
        sd = float(np.sqrt(max(var, 0.0)))
        out.append((pair, float(qa[pair] - Z_95 * sd), float(qa[pair] + Z_95 * sd)))
    return out
