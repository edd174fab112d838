"""Sorted-l1 norm, its proximal operator and its dual norm.

The sorted-l1 norm of a vector b under a nonincreasing nonnegative
sequence lam is

    sum_i lam_i * |b|_(i)

where |b|_(1) >= |b|_(2) >= ... are the absolute entries in decreasing
order.  With a constant sequence it collapses to ``lam_1 * ||b||_1``.
Everything here is a pure function of its arguments.
"""
import numpy as np


def validate_lambda_seq(lam, require_positive=False):
    """Check that lam is a valid tuning sequence and return it as an array.

    Parameters
    ----------
    lam : array-like
        Candidate sequence; must be nonincreasing with nonnegative entries.
    require_positive : bool
        When True additionally require lam[0] > 0 (norm-mode use).

    Returns
    -------
    lam : ndarray of float
    """
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    if lam.ndim != 1:
        raise ValueError("tuning sequence must be one-dimensional")
    if lam.size and lam[-1] < 0:
        raise ValueError("tuning sequence must be nonnegative")
    if np.any(np.diff(lam) > 0):
        raise ValueError("tuning sequence must be nonincreasing")
    if require_positive and (lam.size == 0 or lam[0] <= 0):
        raise ValueError("tuning sequence must have a positive leading entry")
    return lam


def sorted_l1_norm(lam, b):
    """Evaluate the sorted-l1 norm of b under the sequence lam.

    Parameters
    ----------
    lam : array-like
        Nonincreasing nonnegative sequence, same length as b.
    b : array-like

    Returns
    -------
    float
    """
    lam = validate_lambda_seq(lam)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != lam.shape:
        raise ValueError("sequence and vector lengths differ: %d vs %d"
                         % (lam.size, b.size))
    return float(np.sort(np.abs(b))[::-1] @ lam)


def _pool_nonincreasing(z):
    # Stack-based pool-adjacent-violators pass: returns the closest (in
    # least squares) nonincreasing vector to z, clamped at zero.  Adjacent
    # blocks are merged while a later block average exceeds an earlier one.
    n = z.size
    total = np.empty(n)
    count = np.empty(n, dtype=np.intp)
    t = -1
    for k in range(n):
        t += 1
        total[t] = z[k]
        count[t] = 1
        while t > 0 and total[t - 1] * count[t] <= total[t] * count[t - 1]:
            total[t - 1] += total[t]
            count[t - 1] += count[t]
            t -= 1
    return np.repeat(np.maximum(total[:t + 1] / count[:t + 1], 0.0),
                     count[:t + 1])


def prox_sorted_l1(y, lam):
    """Proximal operator of the sorted-l1 norm.

    Returns the unique minimizer of ``0.5*||y - b||^2 + sum_i lam_i |b|_(i)``.

    Parameters
    ----------
    y : array-like
    lam : array-like
        Nonincreasing nonnegative sequence, same length as y.

    Returns
    -------
    b : ndarray
        Same shape as y; componentwise no larger than y in magnitude and
        sign-matched with y on its support.
    """
    lam = validate_lambda_seq(lam)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != lam.shape:
        raise ValueError("sequence and vector lengths differ: %d vs %d"
                         % (lam.size, y.size))
    ay = np.abs(y)
    # .. stable sort keeps original-index order among tied magnitudes ..
    order = np.argsort(-ay, kind="stable")
    x = _pool_nonincreasing(ay[order] - lam)
    out = np.empty_like(ay)
    out[order] = x
    return np.sign(y) * out


def sorted_l1_dual_norm(lam, x):
    """Dual norm of the sorted-l1 norm.

    Equals ``max_k (sum of k largest |x|) / (lam_1 + ... + lam_k)``, the
    gauge of the dual unit ball.

    Parameters
    ----------
    lam : array-like
        Nonincreasing sequence with lam[0] > 0.
    x : array-like

    Returns
    -------
    float
    """
    lam = validate_lambda_seq(lam, require_positive=True)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != lam.shape:
        raise ValueError("sequence and vector lengths differ: %d vs %d"
                         % (lam.size, x.size))
    num = np.cumsum(np.sort(np.abs(x))[::-1])
    den = np.cumsum(lam)
    # lam may hit zero in the tail; the cumulative sums stay positive
    return float(np.max(num / den))


def in_dual_unit_ball(lam, x, tol=0.0):
    """True when every cumulative sorted-magnitude sum of x stays below the
    matching cumulative sum of lam, within tol (dual norm <= 1 + tol)."""
    return sorted_l1_dual_norm(lam, x) <= 1.0 + tol
