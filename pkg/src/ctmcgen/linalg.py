"""Dense matrix kernels: exponential, principal logarithm, Van Loan integrals.

Everything here is a pure function of its arguments and safe to call
concurrently.  Matrices are plain ``numpy`` arrays; sizes in this package are
small (a handful of rating states, so block matrices up to ~4h), which keeps
dense scaling-and-squaring methods the right tool.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DimensionError, InvalidMatrix, LogFailed, LogUndefined

#: entries of a stochastic result more negative than this raise, smaller
#: violations are clamped to zero and the row renormalized
NEGATIVE_CLAMP = 1e-14

#: eigenvector condition number above which the eigendecomposition log is
#: considered unreliable and inverse scaling-and-squaring is used instead
EIG_COND_LIMIT = 1e8

#: eigenvalue magnitude below which the principal logarithm is undefined
ZERO_EIGENVALUE = 1e-12


def _as_square(a, name="matrix"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix(f"{name} contains non-finite entries")
    return a


def _is_generator_like(a, tol=1e-9):
    """Cheap structural test: nonnegative off-diagonals and zero row sums."""
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    if off.min() < -tol:
        return False
    return np.max(np.abs(a.sum(axis=1))) <= tol * max(1.0, np.abs(a).max())


def expm(a, t=1.0):
    """Matrix exponential ``e^{a t}`` via scaling-and-squaring with Pade-13.

    When ``a`` is an intensity matrix the result is a stochastic matrix; tiny
    negative entries (roundoff, magnitude <= ``NEGATIVE_CLAMP``) are clamped
    to zero and the rows renormalized.  Larger negative entries indicate a
    broken input and raise.
    """
    a = _as_square(a)
    if t < 0:
        raise InvalidMatrix(f"time must be nonnegative, got {t}")
    if t == 0:
        return np.eye(a.shape[0], dtype=a.dtype)
    result = scipy.linalg.expm(a * t)
    if np.isrealobj(result) and _is_generator_like(a):
        low = result.min()
        if low < -NEGATIVE_CLAMP:
            raise InvalidMatrix(
                f"exponential of intensity matrix produced entry {low:.3e} < -{NEGATIVE_CLAMP:g}"
            )
        if low < 0.0:
            np.clip(result, 0.0, None, out=result)
            result /= result.sum(axis=1, keepdims=True)
    return result


def logm(p):
    """Principal matrix logarithm, complex entries preserved.

    Primary route is the eigendecomposition with the principal branch of the
    scalar logarithm.  Near-defective inputs (eigenvector condition number
    above ``EIG_COND_LIMIT``) fall back to inverse scaling-and-squaring.

    Raises ``LogUndefined`` for (numerically) singular inputs and
    ``LogFailed`` when both routes break down.
    """
    p = _as_square(p)
    eigvals, eigvecs = np.linalg.eig(p.astype(complex))
    if np.min(np.abs(eigvals)) < ZERO_EIGENVALUE:
        raise LogUndefined(
            f"eigenvalue with magnitude {np.min(np.abs(eigvals)):.3e} below {ZERO_EIGENVALUE:g}"
        )
    cond = np.linalg.cond(eigvecs)
    if cond <= EIG_COND_LIMIT:
        log_p = eigvecs @ np.diag(np.log(eigvals)) @ np.linalg.inv(eigvecs)
        if np.all(np.isfinite(log_p)):
            return log_p
    # nearly defective eigenvector basis: inverse scaling-and-squaring
    try:
        log_p = scipy.linalg.logm(np.asarray(p, dtype=complex))
    except Exception as exc:  # pragma: no cover - scipy rarely raises here
        raise LogFailed(f"inverse scaling-and-squaring failed: {exc}") from exc
    if not np.all(np.isfinite(log_p)):
        raise LogFailed("matrix logarithm produced non-finite entries")
    return log_p


def block_upper(a, b):
    """Block upper-triangular matrix ``[[a, b], [0, a]]``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"block shapes differ: {a.shape} vs {b.shape}")
    n = a.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=np.result_type(a, b))
    out[:n, :n] = a
    out[:n, n:] = b
    out[n:, n:] = a
    return out


def vanloan_integral(q, b, t):
    """Integral ``int_0^t e^{q(t-u)} b e^{qu} du`` by block exponentiation.

    The integral is the top-right block of ``e^{[[q, b], [0, q]] t}``; only
    that block is returned.
    """
    q = _as_square(q, "q")
    b = _as_square(b, "b")
    if q.shape != b.shape:
        raise DimensionError(f"operand shapes differ: {q.shape} vs {b.shape}")
    if t <= 0:
        raise InvalidMatrix(f"time must be positive, got {t}")
    n = q.shape[0]
    big = scipy.linalg.expm(block_upper(q, b) * t)
    return big[:n, n:]
