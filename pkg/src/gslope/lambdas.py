"""Tuning-sequence generation for grouped sorted-l1 regression.

Four constructions are provided, all driven by chi-distribution numerics:

* ``lambda_max``: entrywise maxima of weighted chi quantiles; conservative,
  with provable group-FDR control on cross-group-orthogonal designs.
* ``lambda_mean``: inverts the mixture CDF of the scaled chi variables
  instead of taking maxima; less conservative, identical in the
  homogeneous case.
* ``lambda_corrected_equal`` / ``lambda_corrected_general``: iterative
  variance-inflation corrections for near-orthogonal Gaussian designs with
  equal and arbitrary group sizes.

Also here: the signal-strength scale ``signal_strength(m, l)`` used by the
simulation experiments.
"""
from dataclasses import dataclass

import numpy as np
from scipy import special

_BISECT_MAX_ITER = 200
_BISECT_RTOL = 1e-13


def chi_cdf(df, x):
    """CDF of the chi distribution (square root of a chi-square variable).

    Computed through the regularized lower incomplete gamma function
    ``P(df/2, x^2/2)``; absolute accuracy is at the 1e-14 scale.

    Parameters
    ----------
    df : int or float
        Degrees of freedom, at least 1.
    x : float or array-like
        Evaluation points, nonnegative.

    Returns
    -------
    float or ndarray
    """
    if df < 1:
        raise ValueError("degrees of freedom must be at least 1")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("chi CDF argument must be nonnegative")
    out = special.gammainc(df / 2.0, np.square(x) / 2.0)
    return float(out) if out.ndim == 0 else out


def chi_quantile(df, p):
    """Inverse chi CDF.

    Parameters
    ----------
    df : int or float
        Degrees of freedom, at least 1.
    p : float or array-like
        Probabilities in [0, 1).

    Returns
    -------
    float or ndarray
        Nonnegative quantiles; roundtrips through ``chi_cdf`` to 1e-10.
    """
    if df < 1:
        raise ValueError("degrees of freedom must be at least 1")
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0) | (p >= 1)):
        raise ValueError("probability must lie in [0, 1)")
    out = np.sqrt(2.0 * special.gammaincinv(df / 2.0, p))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GroupSpec:
    """Group layout a tuning sequence is generated for.

    Attributes
    ----------
    q : float
        Target group-FDR level, in (0, 1).
    ranks : ndarray of int
        Per-group ranks l_i, each at least 1.
    weights : ndarray of float
        Positive per-group weights; defaults to sqrt(ranks).
    n : int or None
        Sample size; required by the corrected constructions only.
    """

    q: float
    ranks: np.ndarray
    weights: np.ndarray = None
    n: int | None = None

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie strictly between 0 and 1")
        ranks = np.asarray(self.ranks, dtype=np.intp)
        if ranks.ndim != 1 or ranks.size == 0:
            raise ValueError("ranks must be a nonempty vector")
        if np.any(ranks < 1):
            raise ValueError("every group rank must be at least 1")
        object.__setattr__(self, "ranks", ranks)
        weights = self.weights
        if weights is None:
            weights = np.sqrt(ranks.astype(np.float64))
        else:
            weights = np.asarray(weights, dtype=np.float64)
            if weights.shape != ranks.shape:
                raise ValueError("weights and ranks lengths differ")
            if np.any(weights <= 0):
                raise ValueError("weights must be positive")
        object.__setattr__(self, "weights", weights)
        if self.n is not None and int(self.n) < 1:
            raise ValueError("sample size must be positive")

    @property
    def m(self) -> int:
        return self.ranks.size

    def rank_classes(self):
        """Distinct (rank, weight) pairs with their multiplicities."""
        pairs = {}
        for l, w in zip(self.ranks.tolist(), self.weights.tolist()):
            pairs[(l, w)] = pairs.get((l, w), 0) + 1
        ls = np.array([k[0] for k in pairs], dtype=np.float64)
        ws = np.array([k[1] for k in pairs], dtype=np.float64)
        counts = np.array(list(pairs.values()), dtype=np.float64)
        return ls, ws, counts


def lambda_max(spec: GroupSpec) -> np.ndarray:
    """Entrywise-maximum sequence of weighted chi quantiles.

    Entry i is ``max_j (1/w_j) * chi_quantile(l_j, 1 - q*i/m)``; the result
    is nonincreasing because each quantile is.

    Parameters
    ----------
    spec : GroupSpec

    Returns
    -------
    ndarray, shape (m,)
    """
    m = spec.m
    levels = 1.0 - spec.q * np.arange(1, m + 1) / m
    ls, ws, _ = spec.rank_classes()
    out = np.zeros(m)
    for l, w in zip(ls, ws):
        out = np.maximum(out, chi_quantile(l, levels) / w)
    return out


def _mixture_cdf(x, ls, ws, counts, scales=None):
    # CDF of the equal-weight mixture of (1/w)*chi_l variables, optionally
    # inflated per class by ``scales``: entries (s/w)*chi_l.
    x = np.asarray(x, dtype=np.float64)
    args = np.multiply.outer(ws, x)
    if scales is not None:
        args /= scales.reshape((-1,) + (1,) * x.ndim)
    vals = special.gammainc(ls.reshape((-1,) + (1,) * x.ndim) / 2.0,
                            np.square(args) / 2.0)
    return np.tensordot(counts, vals, axes=1) / counts.sum()


def _invert_mixture(targets, ls, ws, counts, hi, scales=None):
    # Vectorized bisection on the monotone mixture CDF.
    targets = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    lo = np.zeros_like(targets)
    hi = np.full_like(targets, hi)
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        below = _mixture_cdf(mid, ls, ws, counts, scales) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= _BISECT_RTOL * np.maximum(1.0, hi)):
            break
    return 0.5 * (lo + hi)


def lambda_mean(spec: GroupSpec) -> np.ndarray:
    """Sequence inverting the mixture CDF of the weighted chi variables.

    Entry r solves ``mean_j chi_cdf(l_j, w_j * x) = 1 - q*r/m``, i.e. the
    per-group tail probabilities sum to ``q*r`` exactly.  Coincides with
    ``lambda_max`` when all groups share one (rank, weight) pair.

    Parameters
    ----------
    spec : GroupSpec

    Returns
    -------
    ndarray, shape (m,)
    """
    m = spec.m
    ls, ws, counts = spec.rank_classes()
    targets = 1.0 - spec.q * np.arange(1, m + 1) / m
    hi = chi_quantile(ls.max(), 1.0 - spec.q / (2.0 * m * m)) / ws.min()
    return _invert_mixture(targets, ls, ws, counts, hi)


def _require_n(spec, name):
    if spec.n is None:
        raise ValueError("%s needs the sample size n in the group spec"
                         % name)
    return int(spec.n)


def lambda_corrected_equal(spec: GroupSpec) -> np.ndarray:
    """Variance-inflation corrected sequence for equal group sizes.

    Starts from the orthogonal-case value and inflates each subsequent
    entry by ``S = sqrt((n - l(i-1))/n + w^2 ||lam_so_far||^2 /
    (n - l(i-1) - 1))``.  The sequence is forced nonincreasing: as soon as
    a corrected candidate exceeds its predecessor (or a denominator
    degenerates), the remainder is flattened at the previous value.

    Parameters
    ----------
    spec : GroupSpec
        Must carry a common rank, a common weight, and ``n``.

    Returns
    -------
    ndarray, shape (m,)
    """
    n = _require_n(spec, "lambda_corrected_equal")
    ls, ws, _ = spec.rank_classes()
    if ls.size != 1:
        raise ValueError("lambda_corrected_equal needs a common group rank "
                         "and weight; use lambda_corrected_general instead")
    l, w = float(ls[0]), float(ws[0])
    m = spec.m
    lam = np.empty(m)
    lam[0] = chi_quantile(l, 1.0 - spec.q / m) / w
    norm2 = lam[0] ** 2
    for i in range(2, m + 1):
        denom = n - l * (i - 1) - 1
        if denom <= 0:
            lam[i - 1:] = lam[i - 2]
            break
        scale2 = (n - l * (i - 1)) / n + w * w * norm2 / denom
        cand = np.sqrt(scale2) / w * chi_quantile(l, 1.0 - spec.q * i / m)
        if not np.isfinite(cand) or cand > lam[i - 2]:
            lam[i - 1:] = lam[i - 2]
            break
        lam[i - 1] = cand
        norm2 += cand ** 2
    return lam


def lambda_corrected_general(spec: GroupSpec) -> np.ndarray:
    """Variance-inflation corrected sequence for arbitrary group sizes.

    Entry 1 matches ``lambda_mean``.  For entry i, each (rank, weight)
    class gets its own inflation factor S_j built from the running sum of
    squared sequence values, and the candidate inverts the mixture CDF of
    the inflated variables ``(S_j / w_j) * chi_{l_j}`` at ``1 - q*i/m``.
    Flattening on violations mirrors the equal-size construction.

    Parameters
    ----------
    spec : GroupSpec
        Must carry ``n``.

    Returns
    -------
    ndarray, shape (m,)
    """
    n = _require_n(spec, "lambda_corrected_general")
    m = spec.m
    ls, ws, counts = spec.rank_classes()
    qhead = 1.0 - spec.q / (2.0 * m * m)
    lam = np.empty(m)
    hi0 = chi_quantile(ls.max(), qhead) / ws.min()
    lam[0] = _invert_mixture(1.0 - spec.q / m, ls, ws, counts, hi0)[0]
    norm2 = lam[0] ** 2
    for i in range(2, m + 1):
        denoms = n - ls * (i - 1) - 1
        if np.any(denoms <= 0):
            lam[i - 1:] = lam[i - 2]
            break
        scales = np.sqrt((n - ls * (i - 1)) / n + ws * ws * norm2 / denoms)
        if not np.all(np.isfinite(scales)):
            lam[i - 1:] = lam[i - 2]
            break
        hi = np.max(scales / ws) * chi_quantile(ls.max(), qhead)
        cand = _invert_mixture(1.0 - spec.q * i / m, ls, ws, counts, hi,
                               scales)[0]
        if not np.isfinite(cand) or cand > lam[i - 2]:
            lam[i - 1:] = lam[i - 2]
            break
        lam[i - 1] = cand
        norm2 += cand ** 2
    return lam


def signal_strength(m, l):
    """Magnitude making one group effect comparable to the largest of m
    null chi_l variables: ``sqrt(4*ln(m)/(1 - m**(-2/l)) - l)``.

    Parameters
    ----------
    m : int
        Group count, at least 2.
    l : int or float
        Group rank.

    Returns
    -------
    float
    """
    m = float(m)
    l = float(l)
    if m <= 1:
        raise ValueError("signal strength needs at least two groups")
    if l < 1:
        raise ValueError("signal strength needs a positive rank")
    radicand = 4.0 * np.log(m) / (1.0 - m ** (-2.0 / l)) - l
    if radicand <= 0:
        raise ValueError("signal strength undefined: rank %g too large for "
                         "%g groups" % (l, m))
    return float(np.sqrt(radicand))
