"""Noise-level estimation interleaved with grouped sorted-l1 fits.

The noise scale is rarely known in practice.  The loop implemented here
alternates between a residual-variance estimate on the current support
and a refit with the updated scale, until the selected support
reproduces itself.  Alternating supports are possible in finite
precision, so the loop also watches for cycles and caps the number of
rounds.
"""

import math
from dataclasses import dataclass

import numpy as np

from .solver import GSlopeProblem, SolverConfig, solve


class SupportTooLargeError(ValueError):
    """Selected columns leave no residual degrees of freedom."""


@dataclass(frozen=True)
class SigmaTrace:
    """Record of the estimation rounds.

    ``iterations`` holds one ``(support, sigma)`` pair per round: the
    support the variance estimate was computed on (a tuple of group
    indices) and the resulting scale.  On convergence the final two
    entries are equal; before that, consecutive supports differ.
    """

    iterations: tuple
    converged: bool
    cycle_detected: bool


def ols_rss(y, X, columns, with_intercept=True):
    """Residual sum of squares of least squares on selected columns.

    Parameters
    ----------
    y : ndarray of shape (n,)
    X : ndarray of shape (n, p)
    columns : sequence of int
        Column indices of X to regress on; may be empty.
    with_intercept : bool
        Include a constant regressor.

    Returns
    -------
    rss : float
    dof : int
        Residual degrees of freedom, ``n`` minus the rank of the
        regression matrix (intercept column included).  A
        rank-deficient selection is handled by the least-norm solution
        with the accordingly larger dof.

    Raises
    ------
    ValueError
        If no residual degrees of freedom remain.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    columns = np.asarray(columns, dtype=int)
    parts = []
    if with_intercept:
        parts.append(np.ones((n, 1)))
    if columns.size:
        parts.append(np.asarray(X, dtype=float)[:, columns])
    if not parts:
        rank = 0
        rss = float(y @ y)
    else:
        Z = np.hstack(parts)
        coef, _, rank, _ = np.linalg.lstsq(Z, y, rcond=None)
        # .. lstsq omits residuals on rank deficiency; recompute always ..
        r = y - Z @ coef
        rss = float(r @ r)
    dof = int(n - rank)
    if dof <= 0:
        raise ValueError("no residual degrees of freedom "
                         "(n = %d, rank = %d)" % (n, rank))
    return rss, dof


def _rebuild_columns(design):
    # undo the per-group orthonormalization: U_i R_i gives the original block
    X = np.zeros((design.n, design.p))
    for i, idx in enumerate(design.partition.groups):
        X[:, idx] = design.matrix[:, design.block(i)] @ design.factors[i]
    return X


def _support_columns(partition, support):
    if not support:
        return np.empty(0, dtype=int)
    return np.concatenate([partition.groups[i] for i in support])


def estimate_sigma_gslope(y, design, lam, config=None, with_intercept=True,
                          max_rounds=100):
    """Fit with an unknown noise scale.

    Starting from the empty support, repeat: estimate the residual
    variance by least squares on the current support, refit with the
    square root of that estimate as the scale, and read off the new
    support.  Stop when the support reproduces itself.

    If a support recurs non-consecutively the iteration has entered a
    cycle; the fit with the smallest scale estimate among the cycle
    members is returned and the trace flags ``cycle_detected``.  A hard
    cap of ``max_rounds`` rounds guarantees termination either way.

    Parameters
    ----------
    y : ndarray of shape (n,)
    design : StandardizedDesign
    lam : ndarray of shape (m,)
        Penalty sequence, nonincreasing and nonnegative.
    config : SolverConfig, optional
    with_intercept : bool
        Include a constant term in the variance regressions.
    max_rounds : int

    Returns
    -------
    fit : GSlopeFit
    trace : SigmaTrace

    Raises
    ------
    SupportTooLargeError
        When the selected columns leave no residual degrees of freedom.
    """
    config = config or SolverConfig()
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if y.shape[0] <= 1:
        raise ValueError("need more than one observation to estimate sigma")
    partition = design.partition
    X_raw = _rebuild_columns(design)

    support = ()
    first_round = {support: 0}
    entries = []
    fits = []
    for _ in range(max_rounds):
        cols = _support_columns(partition, support)
        try:
            rss, dof = ols_rss(y, X_raw, cols, with_intercept=with_intercept)
        except ValueError as err:
            raise SupportTooLargeError(
                "support too large for sigma estimation") from err
        sigma_hat = math.sqrt(rss / dof)
        if sigma_hat == 0.0:
            # exact interpolation; a tiny positive scale keeps the
            # problem well posed without changing the fit
            sigma_hat = float(np.finfo(float).tiny)
        entries.append((support, sigma_hat))
        fit = solve(GSlopeProblem(y=y, design=design, lam=lam,
                                  sigma=sigma_hat), config)
        fits.append(fit)
        new_support = tuple(int(g) for g in fit.selected)
        if new_support == support:
            entries.append((new_support, sigma_hat))
            return fit, SigmaTrace(iterations=tuple(entries), converged=True,
                                   cycle_detected=False)
        if new_support in first_round:
            start = first_round[new_support]
            best = min(range(start, len(fits)), key=lambda r: entries[r][1])
            return fits[best], SigmaTrace(iterations=tuple(entries),
                                          converged=False,
                                          cycle_detected=True)
        first_round[new_support] = len(entries)
        support = new_support
    return fits[-1], SigmaTrace(iterations=tuple(entries), converged=False,
                                cycle_detected=False)
