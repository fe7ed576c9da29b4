"""EM estimation of a generator from discretely observed transition counts.

The E-step expectations (jumps and holding times of the latent chain,
conditional on the observed start/end states of each company-year) have
closed forms as top-right blocks of exponentials of 2h-by-2h block
matrices; the M-step is the ratio of expected jumps to expected holding
time.  Transition counts are used where the underlying theory is stated
with probabilities: the per-row company count cancels in the M-step ratio,
so the iteration is identical, while the log-likelihood and all curvature
information pick up the sample-size scaling needed for standard errors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .core import GeneratorMatrix, ObservationSet, TransitionMatrix, validate_generator
from .errors import MisspecifiedGenerator, ZeroHoldingTime
from .regularize import qog

ZERO_MODEL_PROBABILITY = 1e-300


@dataclass(frozen=True)
class EmConfig:
    """Stopping rules and safeguards for the EM iteration."""

    eps_band: float = 1e-6
    tol_param: float = 1e-7
    tol_loglik: float = 1e-10
    max_iter: int = 500
    zero_floor: float = 1e-5

    @property
    def max_entry(self):
        """Cap on individual intensities implied by the boundary band."""
        return 1.0 / self.eps_band

    def __post_init__(self):
        if not 0 < self.eps_band < 1:
            raise ValueError("eps_band must lie in (0, 1)")
        if self.tol_param <= 0 or self.tol_loglik <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")


@dataclass(frozen=True)
class ExpectedStats:
    """Conditional expectations of complete-data sufficient statistics."""

    jumps: np.ndarray
    holds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "jumps", np.asarray(self.jumps, dtype=float))
        object.__setattr__(self, "holds", np.asarray(self.holds, dtype=float))
        self.jumps.setflags(write=False)
        self.holds.setflags(write=False)


@dataclass(frozen=True)
class EmReport:
    """Outcome of one EM run."""

    estimate: GeneratorMatrix
    loglik_trace: np.ndarray
    status: str  # "converged" | "max_iter" | "boundary_hit"
    iterations: int
    stats: ExpectedStats | None
    boundary_entry: tuple | None = None
    degenerate_rows: tuple = ()
    bound_violations: tuple = ()


def _unit_pair(h, i, j, scale=1.0):
    b = np.zeros((h, h))
    b[i, j] = scale
    return b


def jump_block(q, i, j):
    """2h-by-2h block matrix whose exponential yields expected i->j jumps."""
    q = np.asarray(q, dtype=float)
    return linalg.block_upper(q, _unit_pair(q.shape[0], i, j, q[i, j]))


def hold_block(q, i):
    """2h-by-2h block matrix whose exponential yields expected state-i time."""
    q = np.asarray(q, dtype=float)
    return linalg.block_upper(q, _unit_pair(q.shape[0], i, i))


def _weights(q, obs: ObservationSet):
    """Counts divided by model transition probabilities, zero where unobserved."""
    p = linalg.expm(np.asarray(q, dtype=float), obs.dt)
    c = obs.total_counts()
    seen = c > 0
    if np.any(seen & (p <= ZERO_MODEL_PROBABILITY)):
        s, r = np.argwhere(seen & (p <= ZERO_MODEL_PROBABILITY))[0]
        raise MisspecifiedGenerator(
            f"observed transition ({s}, {r}) has zero probability under the model"
        )
    w = np.zeros_like(p)
    w[seen] = c[seen] / p[seen]
    return w, p


def expected_statistics(q, obs: ObservationSet) -> ExpectedStats:
    """Expected jump counts and holding times given the observed counts.

    ``jumps[i, j]`` sums, over every observed company-window, the expected
    number of latent i->j moves conditional on the window's endpoints;
    ``holds[i]`` likewise accumulates expected time spent in state ``i``.
    """
    qa = np.asarray(q, dtype=float)
    h = qa.shape[0]
    w, _ = _weights(qa, obs)
    jumps = np.zeros((h, h))
    holds = np.zeros(h)
    for i in range(h):
        block = linalg.expm(hold_block(qa, i), obs.dt)
        holds[i] = np.sum(w * block[:h, h:])
        for j in range(h):
            if i == j or qa[i, j] == 0.0:
                continue
            block = linalg.expm(jump_block(qa, i, j), obs.dt)
            jumps[i, j] = np.sum(w * block[:h, h:])
    return ExpectedStats(jumps=jumps, holds=holds)


def observed_loglik(q, obs: ObservationSet) -> float:
    """Count-weighted log-likelihood of the observed transitions.

    Returns ``-inf`` (rather than raising) when some observed transition is
    impossible under the model, so optimization monitors can compare states.
    """
    p = linalg.expm(np.asarray(q, dtype=float), obs.dt)
    c = obs.total_counts()
    seen = c > 0
    if np.any(seen & (p <= 0)):
        return -np.inf
    return float(np.sum(c[seen] * np.log(p[seen])))


def em_step(q, obs: ObservationSet, stats: ExpectedStats | None = None) -> GeneratorMatrix:
    """One EM update: ratio of expected jumps to expected holding times.

    Entries at exactly zero have zero expected jumps and therefore stay at
    exactly zero; the absorbing last row never changes.  A state with zero
    expected holding time but positive expected jumps means the statistics
    are inconsistent and raises.
    """
    qa = np.asarray(q, dtype=float)
    h = qa.shape[0]
    if stats is None:
        stats = expected_statistics(qa, obs)
    new = np.zeros_like(qa)
    for i in range(h - 1):
        if stats.holds[i] <= 0.0:
            if np.any(stats.jumps[i] > 0):
                raise ZeroHoldingTime(
                    f"state {i} has zero expected holding time but expected jumps"
                )
            new[i] = qa[i]  # unreachable state: nothing to update
            continue
        new[i] = stats.jumps[i] / stats.holds[i]
        new[i, i] = 0.0
    np.fill_diagonal(new, 0.0)
    np.fill_diagonal(new, -new.sum(axis=1))
    new[-1, -1] = 0.0
    return validate_generator(new)


def initial_generator(p_agg: TransitionMatrix, cfg: EmConfig | None = None, zero_mask=None) -> GeneratorMatrix:
    """Starting generator: sign-mapped matrix logarithm, projected and floored.

    The principal logarithm may be complex for a non-embeddable TPM; each
    entry is mapped to ``sign(Re) * magnitude`` before the Euclidean
    projection onto the generator set.  Off-diagonal zeros left by the
    projection are floored to ``cfg.zero_floor`` so the EM can move them,
    except where ``zero_mask`` marks transitions never observed: those stay
    at exactly zero for all iterations (zeros are EM fixed points).
    """
    cfg = cfg or EmConfig()
    raw_log = linalg.logm(np.asarray(p_agg, dtype=float))
    mapped = np.sign(raw_log.real) * np.abs(raw_log)
    q = np.array(qog(mapped), copy=True)
    h = q.shape[0]
    off = ~np.eye(h, dtype=bool)
    if zero_mask is None:
        zero_mask = np.asarray(p_agg, dtype=float) == 0.0
    zero_mask = np.asarray(zero_mask, dtype=bool) & off
    q[zero_mask] = 0.0
    floor = off & (q == 0.0) & ~zero_mask
    floor[-1, :] = False
    q[floor] = cfg.zero_floor
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    q[-1, -1] = 0.0
    return validate_generator(q)


def _monitored_tridiagonal(h):
    """Adjacent-mixing entries of the boundary assumption, 0-indexed."""
    pairs = [(0, 1)]
    for i in range(1, h - 1):
        pairs.append((i, i - 1))
        pairs.append((i, i + 1))
    return pairs


def _boundary_entry(q, pinned, cfg: EmConfig):
    """First free entry outside the constraint band, or None."""
    h = q.shape[0]
    for i in range(h - 1):
        for j in range(h):
            if i != j and not pinned[i, j] and q[i, j] >= cfg.max_entry:
                return (i, j)
    for i, j in _monitored_tridiagonal(h):
        if not pinned[i, j] and q[i, j] <= cfg.eps_band:
            return (i, j)
    return None


def expectation_bound_diagnostics(q, obs: ObservationSet, stats: ExpectedStats):
    """Advisory lower-bound checks on the expected statistics.

    The bounds hold under the adjacent-mixing assumption; the effective band
    width is taken as the largest value consistent with the current iterate
    (smallest monitored tri-diagonal entry, capped by the reciprocal of the
    largest intensity).  Returns violated entries, normally none; an empty
    band (some monitored entry at zero) yields no checks.
    """
    qa = np.asarray(q, dtype=float)
    h = qa.shape[0]
    tri = [qa[i, j] for i, j in _monitored_tridiagonal(h)]
    off = ~np.eye(h, dtype=bool)
    max_entry = qa[off].max()
    if min(tri) <= 0 or max_entry <= 0:
        return ()
    eps = min(min(tri), 1.0 / max_entry)
    best = obs.counts.max(axis=0)
    slack = 1.0 - 1e-9
    violations = []
    for i in range(h - 1):
        for j in range(h):
            if i != j and best[i, j] > 0 and qa[i, j] > 0:
                lower = best[i, j] * eps * qa[i, j] / h
                if stats.jumps[i, j] < lower * slack:
                    violations.append(("jumps", i, j, stats.jumps[i, j], lower))
        if best[i, i] > 0:
            lower = best[i, i] * obs.dt * np.exp(-h * obs.dt / eps)
            if stats.holds[i] < lower * slack:
                violations.append(("holds", i, i, stats.holds[i], lower))
    return tuple(violations)


def estimate_em(obs: ObservationSet, cfg: EmConfig | None = None) -> EmReport:
    """Run the EM iteration to convergence and report the trajectory.

    Stops when the largest parameter change falls below ``tol_param``, the
    relative log-likelihood improvement falls below ``tol_loglik``, an
    iterate leaves the constraint band (reported, never clamped), or
    ``max_iter`` is reached.
    """
    cfg = cfg or EmConfig()
    h = obs.dim
    total = obs.total_counts()
    off = ~np.eye(h, dtype=bool)
    zero_mask = (total == 0.0) & off
    q = initial_generator(obs.mean_tpm(), cfg, zero_mask=zero_mask)
    pinned = zero_mask.copy()
    degenerate = tuple(int(i) for i in range(h - 1) if obs.occupancy()[i] == 0)

    trace = [observed_loglik(q, obs)]
    status = "max_iter"
    boundary_entry = None
    iterations = 0
    stats = None
    for _ in range(cfg.max_iter):
        stats = expected_statistics(q, obs)
        q_next = em_step(q, obs, stats)
        iterations += 1
        ll = observed_loglik(q_next, obs)
        trace.append(ll)
        delta = float(np.max(np.abs(np.asarray(q_next) - np.asarray(q))))
        q = q_next
        boundary_entry = _boundary_entry(np.asarray(q), pinned, cfg)
        if boundary_entry is not None:
            status = "boundary_hit"
            break
        if delta < cfg.tol_param:
            status = "converged"
            break
        if abs(trace[-1] - trace[-2]) < cfg.tol_loglik * (1.0 + abs(trace[-2])):
            status = "converged"
            break
    final_stats = expected_statistics(q, obs)
    violations = expectation_bound_diagnostics(q, obs, final_stats)
    if violations:
        warnings.warn(f"expected-statistics bound diagnostics flagged {len(violations)} entries")
    return EmReport(
        estimate=q,
        loglik_trace=np.asarray(trace),
        status=status,
        iterations=iterations,
        stats=final_stats,
        boundary_entry=boundary_entry,
        degenerate_rows=degenerate,
        bound_violations=violations,
    )
