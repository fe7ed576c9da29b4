import numpy as np
import pytest

from ctmcgen import core, datasets


def endpoint_conditioned_oracle(q, start, dt, n_paths, seed):
    """Brute-force path-simulation oracle for endpoint-conditioned moments.

    Simulates ``n_paths`` unconditioned forward paths and buckets them by
    end state, which makes every bucket an endpoint-conditioned sample.
    Returns per-end-state path counts plus first and second moments of the
    jump counts and holding times, so standard errors of the conditional
    means are available.  Independent of the block-exponential machinery it
    is used to check.
    """
    q = np.asarray(q, dtype=float)
    h = q.shape[0]
    rng = np.random.default_rng(seed)
    rates = -np.diag(q)
    cum = np.cumsum(np.where(np.eye(h, dtype=bool), 0.0, q), axis=1)
    cum = cum / np.where(cum[:, -1] > 0, cum[:, -1], 1.0)[:, None]
    state = np.full(n_paths, start, dtype=np.int64)
    t_rem = np.full(n_paths, float(dt))
    holds = np.zeros((n_paths, h))
    k_path = np.zeros((n_paths, h, h), dtype=np.float32)
    alive = np.arange(n_paths)
    while alive.size:
        rate = rates[state[alive]]
        moving = rate > 0
        stuck = alive[~moving]
        holds[stuck, state[stuck]] += t_rem[stuck]
        alive = alive[moving]
        if not alive.size:
            break
        wait = rng.exponential(1.0 / rates[state[alive]])
        done = wait >= t_rem[alive]
        idx_done = alive[done]
        holds[idx_done, state[idx_done]] += t_rem[idx_done]
        idx_move = alive[~done]
        if idx_move.size:
            w = wait[~done]
            frm = state[idx_move]
            holds[idx_move, frm] += w
            t_rem[idx_move] -= w
            u = rng.random(idx_move.size)
            nxt = (cum[frm] > u[:, None]).argmax(axis=1)
            np.add.at(k_path, (idx_move, frm, nxt), 1.0)
            state[idx_move] = nxt
        alive = idx_move
    counts = np.bincount(state, minlength=h).astype(float)
    k_sum = np.zeros((h, h, h))
    k_sq = np.zeros((h, h, h))
    s_sum = np.zeros((h, h))
    s_sq = np.zeros((h, h))
    np.add.at(k_sum, state, k_path.astype(np.float64))
    np.add.at(k_sq, state, k_path.astype(np.float64) ** 2)
    np.add.at(s_sum, state, holds)
    np.add.at(s_sq, state, holds**2)
    return {"counts": counts, "k_sum": k_sum, "k_sq": k_sq, "s_sum": s_sum, "s_sq": s_sq}


def random_generator(rng, h=5, density=0.8, scale=0.3):
    """Random valid generator with an absorbing last state."""
    off = rng.uniform(0.0, scale, size=(h, h)) * (rng.random((h, h)) < density)
    q = off.copy()
    np.fill_diagonal(q, 0.0)
    q[-1, :] = 0.0
    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def taylor_expm(a, t=1.0, terms=200):
    """Truncated power-series matrix exponential (independent oracle)."""
    a = np.asarray(a, dtype=float)
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms):
        term = term @ (a * t) / k
        out = out + term
    return out


@pytest.fixture
def toy3():
    return np.array([[-0.5, 0.3, 0.2], [0.1, -0.3, 0.2], [0.0, 0.0, 0.0]])


@pytest.fixture
def toy3_obs(toy3):
    p = core.transition_matrix(toy3, 1.0)
    return core.ObservationSet.from_tpms([p], obligors=[50, 40, 0], dt=1.0)


@pytest.fixture
def sample_obs():
    tpm = datasets.sample_annual_tpm()
    return core.ObservationSet.from_tpms([tpm], obligors=[250] * 7 + [0], dt=1.0)
