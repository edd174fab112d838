"""Proximal-gradient solver for grouped sorted-l1 regression.

The problem solved is

    minimize over b:  0.5*||y - X b||^2 + sigma * J(lam, w .* [group norms])

posed on the per-group orthonormalized design.  Group weights are absorbed
into the design (columns of block i scaled by 1/w_i), after which the
penalty is a plain sorted-l1 norm of the block norms and its prox is
separable-by-sorting.  FISTA with a fixed 1/L step drives the iterates;
termination uses two certificates evaluated every iteration: a duality gap
and the dual-ball infeasibility of the residual image.  The cross-group
orthogonal case collapses to an m-dimensional diagonal problem, kept both
as a fast path and as an oracle for the general path.
"""
from dataclasses import dataclass, replace

import numpy as np

from .groups import StandardizedDesign, backmap, block_norms
from .sorted_l1 import (prox_sorted_l1, sorted_l1_dual_norm, sorted_l1_norm,
                        validate_lambda_seq)


@dataclass(frozen=True)
class SolverConfig:
    """Solver tolerances and controls.

    gap_tol is relative: the duality-gap test is ``|gap| <= gap_tol *
    0.5*||y||^2``.  infeas_tol is absolute (the dual norm overshoot above
    1).  selection_threshold is relative to the largest group effect.
    """

    gap_tol: float = 1e-6
    infeas_tol: float = 1e-6
    max_iter: int = 20000
    step_rule: str = "fixed"
    power_iters: int = 50
    power_tol: float = 1e-8
    selection_threshold: float = 1e-8

    def __post_init__(self):
        if min(self.gap_tol, self.infeas_tol, self.power_tol) <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError("step_rule must be 'fixed' or 'backtracking'")


@dataclass(frozen=True)
class GSlopeProblem:
    """A fitting problem: response, standardized design, tuning sequence,
    and noise scale (a positive number, or "estimate")."""

    y: np.ndarray
    design: StandardizedDesign
    lam: np.ndarray
    sigma: float | str = 1.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        object.__setattr__(self, "y", y)
        lam = validate_lambda_seq(self.lam)
        object.__setattr__(self, "lam", lam)
        if y.shape != (self.design.n,):
            raise ValueError("response length %s does not match design rows %d"
                             % (y.shape, self.design.n))
        if lam.size != self.design.m:
            raise ValueError("tuning sequence length %d does not match group "
                             "count %d" % (lam.size, self.design.m))
        if isinstance(self.sigma, str):
            if self.sigma != "estimate":
                raise ValueError("sigma must be a positive number or "
                                 "'estimate'")
        elif not self.sigma > 0:
            raise ValueError("sigma must be a positive number or 'estimate'")


@dataclass(frozen=True)
class GSlopeFit:
    """Fitted model plus solver diagnostics."""

    beta: np.ndarray
    effects: np.ndarray
    selected: np.ndarray
    iterations: int
    duality_gap: float
    infeasibility: float
    objective: float
    sigma_used: float
    converged: bool


def prox_grouped(v, lam, offsets, t=1.0):
    """Prox of ``t * J(lam, block norms)`` at v, for unit group weights.

    Shrinks the vector of block norms by the sorted-l1 prox and rescales
    each block accordingly; zero-norm blocks stay zero.

    Parameters
    ----------
    v : array-like, length offsets[-1]
    lam : array-like
        Nonincreasing nonnegative sequence, one entry per block.
    offsets : ndarray
        Block boundaries (length m + 1).
    t : float
        Positive step size.

    Returns
    -------
    ndarray
    """
    v = np.asarray(v, dtype=np.float64)
    if t <= 0:
        raise ValueError("step size must be positive")
    g = block_norms(v, offsets)
    c = prox_sorted_l1(g, t * np.asarray(lam, dtype=np.float64))
    scale = np.divide(c, g, out=np.zeros_like(g), where=g > 0)
    return np.repeat(scale, np.diff(offsets)) * v


def duality_gap(eta, y, absorbed, offsets, lam, sigma=1.0):
    """Signed duality gap of the weight-absorbed problem at eta.

    Computes ``(A eta)'(y - A eta) - J(sigma*lam, block norms of eta)``
    where A is the absorbed design.  Zero at any exact solution; may be
    negative at inexact iterates, so the sign is reported raw.
    """
    fitted = absorbed @ eta
    return float(fitted @ (y - fitted)) - sorted_l1_norm(
        sigma * np.asarray(lam, dtype=np.float64), block_norms(eta, offsets))


def infeasibility(mu, absorbed, offsets, lam):
    """Overshoot of the dual image of mu outside the dual unit ball.

    ``max(dual_norm(lam, block norms of A' mu) - 1, 0)`` with A the
    absorbed design and lam the effective (noise-scaled) sequence; zero
    exactly when the residual certificate is dual feasible.
    """
    return max(sorted_l1_dual_norm(lam, block_norms(absorbed.T @ mu,
                                                    offsets)) - 1.0, 0.0)


def _estimate_lipschitz(apply_normal, dim, config):
    # Power iteration for the largest eigenvalue of A'A.
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(config.power_iters):
        u = apply_normal(v)
        new = float(np.linalg.norm(u))
        if new == 0.0:
            return 0.0, True
        v = u / new
        if abs(new - estimate) <= config.power_tol * new:
            return new, True
        estimate = new
    return estimate, False


def _fista(apply_A, apply_At, y, lam_eff, offsets, L, config):
    # Core loop on the absorbed problem; returns (eta, iterations, gap,
    # infeasibility, converged).  Both certificates are checked every
    # iteration, starting at eta = 0 so trivial problems cost nothing.
    gap_cap = config.gap_tol * 0.5 * float(y @ y)
    sizes = np.diff(offsets)
    m = lam_eff.size

    def certificates(eta, fitted):
        mu = y - fitted
        gap = float(fitted @ mu) - float(
            np.sort(block_norms(eta, offsets))[::-1] @ lam_eff)
        infeas = max(sorted_l1_dual_norm(
            lam_eff, block_norms(apply_At(mu), offsets)) - 1.0, 0.0)
        return gap, infeas

    eta = np.zeros(offsets[-1])
    gap, infeas = certificates(eta, np.zeros_like(y))
    if abs(gap) <= gap_cap and infeas <= config.infeas_tol:
        return eta, 0, gap, infeas, True

    backtrack = config.step_rule == "backtracking" or L == 0.0
    if not backtrack:
        step = 1.0 / L
    else:
        L = max(L, 1.0)
        step = 1.0 / L
    momentum = eta.copy()
    t_mom = 1.0
    for iteration in range(1, config.max_iter + 1):
        fitted_mom = apply_A(momentum)
        grad = apply_At(fitted_mom - y)
        if backtrack:
            half_mom = 0.5 * float((y - fitted_mom) @ (y - fitted_mom))
            while True:
                cand = _prox_step(momentum - step * grad, lam_eff, offsets,
                                  step, sizes)
                diff = cand - momentum
                fitted_cand = apply_A(cand)
                lhs = 0.5 * float((y - fitted_cand) @ (y - fitted_cand))
                rhs = (half_mom + float(grad @ diff)
                       + 0.5 / step * float(diff @ diff))
                if lhs <= rhs + 1e-12 * max(1.0, abs(rhs)):
                    break
                step *= 0.5
            eta_new = cand
            fitted_new = fitted_cand
        else:
            eta_new = _prox_step(momentum - step * grad, lam_eff, offsets,
                                 step, sizes)
            fitted_new = apply_A(eta_new)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        momentum = eta_new + ((t_mom - 1.0) / t_next) * (eta_new - eta)
        eta = eta_new
        t_mom = t_next
        gap, infeas = certificates(eta, fitted_new)
        if abs(gap) <= gap_cap and infeas <= config.infeas_tol:
            return eta, iteration, gap, infeas, True
    return eta, config.max_iter, gap, infeas, False


def _prox_step(v, lam_eff, offsets, t, sizes):
    g = block_norms(v, offsets)
    c = prox_sorted_l1(g, t * lam_eff)
    scale = np.divide(c, g, out=np.zeros_like(g), where=g > 0)
    return np.repeat(scale, sizes) * v


def _finite_or_raise(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("input contains NaN or infinity")


def _build_fit(design, c, y, lam, sigma, iterations, gap, infeas, converged,
               config):
    effects = block_norms(c, design.offsets)
    top = effects.max(initial=0.0)
    keep = effects > config.selection_threshold * top
    if not np.all(keep):
        c = c.copy()
        for i in np.flatnonzero(~keep):
            c[design.block(i)] = 0.0
        effects = block_norms(c, design.offsets)
    selected = np.flatnonzero(keep)
    beta = backmap(design, c)
    resid = y - design.matrix @ c
    objective = 0.5 * float(resid @ resid) + sigma * sorted_l1_norm(
        lam, design.weights * effects)
    return GSlopeFit(beta=beta, effects=effects, selected=selected,
                     iterations=iterations, duality_gap=gap,
                     infeasibility=infeas, objective=objective,
                     sigma_used=float(sigma), converged=converged)


def solve(problem, config=None):
    """Fit the grouped sorted-l1 problem by FISTA.

    Parameters
    ----------
    problem : GSlopeProblem
    config : SolverConfig, optional

    Returns
    -------
    GSlopeFit
        ``converged`` is False when max_iter ran out before both
        certificates met their tolerances.
    """
    config = config or SolverConfig()
    if problem.sigma == "estimate":
        from .sigma import estimate_sigma_gslope
        fit, _ = estimate_sigma_gslope(problem.y, problem.design,
                                       problem.lam, config=config)
        return fit
    design = problem.design
    _finite_or_raise(problem.y, design.matrix)
    sigma = float(problem.sigma)
    lam_eff = sigma * problem.lam
    inv_w = np.repeat(1.0 / design.weights, design.ranks)
    absorbed = design.matrix * inv_w
    L, ok = _estimate_lipschitz(lambda v: absorbed.T @ (absorbed @ v),
                                design.p_tilde, config)
    run_config = config
    if not ok and config.step_rule == "fixed":
        # power iteration did not settle; fall back to backtracking steps
        run_config = replace(config, step_rule="backtracking")
    eta, iterations, gap, infeas, converged = _fista(
        lambda v: absorbed @ v, lambda r: absorbed.T @ r, problem.y,
        lam_eff, design.offsets, L, run_config)
    c = inv_w * eta
    return _build_fit(design, c, problem.y, problem.lam, sigma, iterations,
                      gap, infeas, converged, config)


def cross_group_coherence(design):
    """Largest absolute inner product between orthonormal columns of
    different groups; zero for a cross-group orthogonal design."""
    gram = design.matrix.T @ design.matrix
    for i in range(design.m):
        b = design.block(i)
        gram[b, b] = 0.0
    return float(np.max(np.abs(gram)))


def solve_orthogonal(problem, config=None, orth_tol=1e-8, check=True):
    """Fast path for cross-group orthogonal designs.

    Reduces the fit to an m-dimensional sorted-l1 problem with diagonal
    design ``diag(1/w_i)`` and data ``||block i of X' y||``, then rebuilds
    the full fit along the per-block directions of the projected response.
    The result matches :func:`solve` up to solver tolerance.

    Parameters
    ----------
    problem : GSlopeProblem
    config : SolverConfig, optional
    orth_tol : float
        Largest cross-group coherence accepted by the check.
    check : bool
        Skip the (quadratic-cost) orthogonality check when the caller
        guarantees it by construction.

    Returns
    -------
    GSlopeFit
    """
    config = config or SolverConfig()
    if problem.sigma == "estimate":
        raise ValueError("sigma estimation is not available on the "
                         "orthogonal fast path; use solve")
    design = problem.design
    _finite_or_raise(problem.y, design.matrix)
    if check:
        coherence = cross_group_coherence(design)
        if coherence > orth_tol:
            raise ValueError("design is not cross-group orthogonal: "
                             "coherence %.3e exceeds %.3e"
                             % (coherence, orth_tol))
    sigma = float(problem.sigma)
    lam_eff = sigma * problem.lam
    projected = design.matrix.T @ problem.y
    data = block_norms(projected, design.offsets)
    d = 1.0 / design.weights
    m = design.m
    singleton = np.arange(m + 1, dtype=np.intp)
    L = float(np.max(d * d))
    c_small, iterations, gap, infeas, converged = _fista(
        lambda v: d * v, lambda r: d * r, data, lam_eff, singleton, L,
        config)
    # rebuild the standardized coefficients along the projected directions
    scale = np.divide(c_small * d, data, out=np.zeros(m), where=data > 0)
    c = np.repeat(scale, design.ranks) * projected
    return _build_fit(design, c, problem.y, problem.lam, sigma, iterations,
                      gap, infeas, converged, config)
