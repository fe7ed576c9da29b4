import numpy as np
import pytest

from ctmcgen import core, datasets, em, hessian, simulate
from ctmcgen.errors import DisallowedPair, SingularInformation


def _direction(h, a, b):
    d = np.zeros((h, h))
    d[a, b] = 1.0
    d[a, a] -= 1.0
    return d


def fd_hessian(q, obs, pairs, step):
    """Central second differences of the log-likelihood (oracle)."""
    h = q.shape[0]
    n = len(pairs)
    out = np.zeros((n, n))
    for ia, a in enumerate(pairs):
        for ib, b in enumerate(pairs):
            da, db = step * _direction(h, *a), step * _direction(h, *b)
            out[ia, ib] = (
                em.observed_loglik(q + da + db, obs)
                - em.observed_loglik(q + da - db, obs)
                - em.observed_loglik(q - da + db, obs)
                + em.observed_loglik(q - da - db, obs)
            ) / (4.0 * step * step)
    return out


def test_allowed_pairs_structure():
    q = np.array(datasets.stable_generator())
    pairs = hessian.AllowedPairs.from_generator(q)
    assert all(i != j for i, j in pairs.pairs)
    assert all(i < 7 for i, _ in pairs.pairs)  # absorbing row excluded
    assert all(q[i, j] > pairs.cutoff for i, j in pairs.pairs)
    assert pairs.count == int((q[:-1] > 1e-8).sum())


def test_gradient_matches_finite_differences(toy3, toy3_obs):
    pairs = hessian.AllowedPairs.from_generator(toy3)
    grad = hessian.loglik_gradient(toy3, toy3_obs, pairs)
    step = 1e-6
    for k, pair in enumerate(pairs.pairs):
        d = step * _direction(3, *pair)
        fd = (em.observed_loglik(toy3 + d, toy3_obs) - em.observed_loglik(toy3 - d, toy3_obs)) / (2 * step)
        assert abs(grad[k] - fd) < 1e-5 * max(1.0, abs(fd))


def test_hessian_matches_finite_differences(toy3, toy3_obs):
    report = hessian.hessian_at(toy3, toy3_obs)
    fd = fd_hessian(toy3, toy3_obs, report.pairs.pairs, step=1e-4)
    rel = np.abs(report.hessian - fd) / np.maximum(np.abs(fd), 1e-8)
    assert rel.max() < 1e-3


def test_hessian_symmetry_before_symmetrization(toy3, toy3_obs):
    pairs = hessian.AllowedPairs.from_generator(toy3)
    raw = np.zeros((pairs.count, pairs.count))
    stats = em.expected_statistics(toy3, toy3_obs)
    for ia, a in enumerate(pairs.pairs):
        for ip, p in enumerate(pairs.pairs):
            val = hessian.second_deriv_R(toy3, toy3, a, p, toy3_obs, pairs)
            if a == p:
                val -= stats.jumps[p] / toy3[p] ** 2
            raw[ia, ip] = val
    assert np.max(np.abs(raw - raw.T)) < 1e-8 * np.max(np.abs(raw))


def test_kronecker_term_only_on_diagonal(toy3, toy3_obs):
    pairs = hessian.AllowedPairs.from_generator(toy3)
    stats = em.expected_statistics(toy3, toy3_obs)
    report = hessian.hessian_at(toy3, toy3_obs)
    a, p = (0, 1), (1, 2)
    mixed = hessian.second_deriv_R(toy3, toy3, a, p, toy3_obs, pairs)
    mixed_t = hessian.second_deriv_R(toy3, toy3, p, a, toy3_obs, pairs)
    ia, ip = pairs.index(a), pairs.index(p)
    # off-diagonal entries carry no jump-expectation spike term
    assert abs(report.hessian[ia, ip] - 0.5 * (mixed + mixed_t)) < 1e-10
    diag = hessian.second_deriv_R(toy3, toy3, a, a, toy3_obs, pairs) - stats.jumps[a] / toy3[a] ** 2
    assert abs(report.hessian[ia, ia] - diag) < 1e-10


def test_constrained_direction_matches_generator_derivative():
    # derivative of the generator in one off-diagonal entry, holding row
    # sums at zero: unit mass at the entry, minus unit mass on the diagonal
    h, a, b = 4, 1, 3
    d = _direction(h, a, b)
    step = 1e-7
    base = np.zeros((h, h))
    base[a, b] = 0.2
    base[a, a] = -0.2
    plus = base + step * d
    assert abs(plus[a, b] - (base[a, b] + step)) < 1e-18
    assert abs(plus.sum()) < 1e-15


def test_second_deriv_disallowed_pair(toy3, toy3_obs):
    with pytest.raises(DisallowedPair):
        hessian.second_deriv_R(toy3, toy3, (0, 1), (2, 0), toy3_obs)


def test_confidence_intervals_zero_variance_degenerate(toy3):
    pairs = hessian.AllowedPairs.from_generator(toy3)
    report = hessian.HessianReport(
        pairs=pairs,
        hessian=-np.eye(pairs.count),
        information=np.eye(pairs.count),
        condition=1.0,
        eigen_min=-1.0,
        eigen_max=-1.0,
        variances=np.zeros(pairs.count),
        ci95=None,
    )
    intervals = hessian.confidence_intervals(report, toy3)
    for (pair, lo, hi) in intervals:
        assert lo == hi == toy3[pair]


def test_singular_information_reported_not_fabricated(toy3, toy3_obs, monkeypatch):
    monkeypatch.setattr(hessian, "CONDITION_LIMIT", 1.0)
    report = hessian.hessian_at(toy3, toy3_obs)
    assert report.variances is None and report.ci95 is None
    with pytest.raises(SingularInformation):
        hessian.confidence_intervals(report, toy3)


def test_cutoff_excludes_unidentified_entries():
    # scarce data pins unobserved transitions at zero, so the allowed set
    # shrinks and the information stays comfortably invertible
    tpm = datasets.sample_annual_tpm()
    obs = core.ObservationSet.from_tpms([tpm], obligors=[5] * 7 + [0])
    q = em.estimate_em(obs, em.EmConfig(max_iter=200)).estimate
    report = hessian.hessian_at(q, obs)
    assert report.pairs.count < 20
    assert report.variances is not None


def test_local_maximum_at_converged_point(sample_obs):
    rep = em.estimate_em(sample_obs, em.EmConfig(tol_param=1e-9, tol_loglik=1e-16, max_iter=2000))
    report = hessian.hessian_at(rep.estimate, sample_obs)
    assert report.eigen_max < 0
    assert report.is_local_maximum


def test_variance_shrinks_with_more_years():
    q_true = datasets.stable_generator()
    spec = simulate.SimSpec(true_generator=q_true, years=16, seeds=(0,), reinsert_defaults=True)
    obs_long = simulate.simulate_tpm_series(spec, seed=0, obligors=300)
    short = core.ObservationSet(
        dt=1.0,
        tpms=obs_long.tpms[:4],
        obligors=obs_long.obligors[:4],
        counts=obs_long.counts[:4],
    )
    entry = (4, 3)  # fifth rating one notch up, a well-identified mid-size rate
    out = {}
    for label, obs in [("short", short), ("long", obs_long)]:
        est = em.estimate_em(obs, em.EmConfig(max_iter=400)).estimate
        report = hessian.hessian_at(est, obs)
        idx = report.pairs.index(entry)
        out[label] = report.variances[idx]
    # four times the data: variance should drop roughly fourfold
    ratio = out["short"] / out["long"]
    assert 2.0 < ratio < 8.0


def test_ci_some_interval_crosses_zero(sample_obs):
    rep = em.estimate_em(sample_obs, em.EmConfig(max_iter=300))
    report = hessian.hessian_at(rep.estimate, sample_obs)
    intervals = hessian.confidence_intervals(report, rep.estimate)
    assert any(lo < 0 <= hi for _, lo, hi in intervals)
