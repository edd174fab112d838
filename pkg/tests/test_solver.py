"""Tests for the FISTA solver, its certificates and the orthogonal path."""
import numpy as np
import pytest

from gslope import (
    GSlopeProblem,
    SolverConfig,
    build_partition,
    cross_group_coherence,
    duality_gap,
    group_effects,
    infeasibility,
    prox_grouped,
    prox_sorted_l1,
    solve,
    solve_orthogonal,
    standardize,
)


def _random_problem(rng, n, sizes, sigma=1.0, lam_scale=1.0, weights=None):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    X = rng.normal(size=(n, int(np.sum(sizes)))) / np.sqrt(n)
    part = build_partition(labels, weights=weights)
    design = standardize(X, part)
    m = len(sizes)
    lam = lam_scale * np.sort(rng.uniform(0.5, 2.0, size=m))[::-1]
    beta = rng.normal(size=X.shape[1]) * (rng.uniform(size=X.shape[1]) < 0.5)
    y = X @ beta + 0.3 * rng.normal(size=n)
    return GSlopeProblem(y=y, design=design, lam=lam, sigma=sigma)


def _block_orthogonal_problem(rng, n, sizes, lam_scale=1.0):
    # orthonormal columns grouped and rescaled by invertible factors give
    # exactly cross-group orthogonal blocks
    p = int(np.sum(sizes))
    Q, _ = np.linalg.qr(rng.normal(size=(n, p)))
    cols = []
    start = 0
    for l in sizes:
        R = rng.normal(size=(l, l)) + 2.0 * np.eye(l)
        cols.append(Q[:, start : start + l] @ R)
        start += l
    X = np.hstack(cols)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    design = standardize(X, build_partition(labels))
    m = len(sizes)
    lam = lam_scale * np.sort(rng.uniform(0.4, 1.5, size=m))[::-1]
    k = max(1, m // 3)
    beta = np.zeros(p)
    for g in rng.choice(m, size=k, replace=False):
        idx = design.partition.groups[g]
        beta[idx] = rng.normal(scale=2.0, size=len(idx))
    y = X @ beta + 0.2 * rng.normal(size=n)
    return GSlopeProblem(y=y, design=design, lam=lam, sigma=1.0)


def test_config_and_problem_validation():
    with pytest.raises(ValueError):
        SolverConfig(gap_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
    with pytest.raises(ValueError):
        SolverConfig(step_rule="adaptive")
    design = standardize(np.eye(3), build_partition([0, 1, 2]))
    with pytest.raises(ValueError):
        GSlopeProblem(y=np.ones(2), design=design, lam=np.ones(3), sigma=1.0)
    with pytest.raises(ValueError):
        GSlopeProblem(y=np.ones(3), design=design, lam=np.ones(2), sigma=1.0)
    with pytest.raises(ValueError):
        GSlopeProblem(y=np.ones(3), design=design, lam=np.ones(3), sigma=-1.0)
    with pytest.raises(ValueError):
        GSlopeProblem(y=np.ones(3), design=design, lam=np.ones(3), sigma="guess")


def test_prox_grouped_examples():
    offsets = np.array([0, 2])
    v = np.array([3.0, 4.0])
    np.testing.assert_array_equal(prox_grouped(v, np.zeros(1), offsets), v)
    # ||v|| = 5 shrinks to 4, scaling the block by 4/5
    np.testing.assert_allclose(
        prox_grouped(v, np.array([1.0]), offsets, t=1.0), [2.4, 3.2]
    )
    # zero block stays zero even under zero shrinkage
    np.testing.assert_array_equal(
        prox_grouped(np.zeros(2), np.array([1.0]), offsets), np.zeros(2)
    )


def test_prox_grouped_singletons_reduce_to_sorted_prox():
    rng = np.random.default_rng(0)
    offsets = np.arange(7)
    for _ in range(50):
        v = rng.normal(scale=2.0, size=6)
        lam = np.sort(np.abs(rng.normal(size=6)))[::-1]
        t = float(rng.uniform(0.1, 2.0))
        np.testing.assert_allclose(
            prox_grouped(v, lam, offsets, t=t), prox_sorted_l1(v, t * lam),
            atol=1e-12,
        )


def test_solve_zero_response():
    rng = np.random.default_rng(1)
    problem = _random_problem(rng, 20, [2, 3, 1])
    zero = GSlopeProblem(
        y=np.zeros(20), design=problem.design, lam=problem.lam, sigma=1.0
    )
    fit = solve(zero)
    np.testing.assert_array_equal(fit.beta, np.zeros(6))
    assert fit.iterations == 0
    assert fit.duality_gap == 0.0
    assert fit.selected.size == 0
    assert fit.converged


def test_solve_huge_lambda_gives_null_fit():
    rng = np.random.default_rng(2)
    problem = _random_problem(rng, 30, [2, 2, 3])
    big = 50.0 * np.linalg.norm(problem.design.matrix.T @ problem.y)
    null = GSlopeProblem(
        y=problem.y,
        design=problem.design,
        lam=np.full(3, big),
        sigma=1.0,
    )
    fit = solve(null)
    assert fit.selected.size == 0
    np.testing.assert_allclose(fit.beta, np.zeros(7), atol=1e-12)
    np.testing.assert_allclose(fit.effects, np.zeros(3), atol=1e-12)
    assert fit.converged


def test_solve_rejects_non_finite_data():
    design = standardize(np.eye(3), build_partition([0, 1, 2]))
    y = np.array([1.0, np.nan, 0.0])
    with pytest.raises(ValueError):
        solve(GSlopeProblem(y=y, design=design, lam=np.ones(3), sigma=1.0))


def test_solve_singleton_orthonormal_matches_scalar_prox():
    rng = np.random.default_rng(3)
    for _ in range(5):
        n = 12
        Q, _ = np.linalg.qr(rng.normal(size=(n, 6)))
        design = standardize(Q, build_partition(np.arange(6), weights=np.ones(6)))
        y = rng.normal(scale=2.0, size=n)
        lam = np.sort(rng.uniform(0.2, 1.0, size=6))[::-1]
        sigma = 0.8
        fit = solve(GSlopeProblem(y=y, design=design, lam=lam, sigma=sigma))
        expect = prox_sorted_l1(Q.T @ y, sigma * lam)
        np.testing.assert_allclose(fit.beta, expect, atol=1e-6)


def test_certificates_at_termination():
    rng = np.random.default_rng(4)
    config = SolverConfig()
    for _ in range(15):
        sizes = rng.integers(1, 4, size=rng.integers(1, 7))
        problem = _random_problem(rng, 40, sizes)
        fit = solve(problem, config)
        assert fit.converged
        assert abs(fit.duality_gap) <= config.gap_tol * 0.5 * float(
            problem.y @ problem.y
        )
        assert fit.infeasibility <= config.infeas_tol
        assert fit.objective <= 0.5 * float(problem.y @ problem.y) + 1e-12


def test_certificate_functions_directly():
    rng = np.random.default_rng(5)
    problem = _random_problem(rng, 25, [2, 3, 2])
    design = problem.design
    inv_w = np.repeat(1.0 / design.weights, design.ranks)
    absorbed = design.matrix * inv_w
    offsets = design.offsets
    lam = problem.lam

    # eta = 0 zeroes both terms of the gap
    assert duality_gap(np.zeros(design.p_tilde), problem.y, absorbed, offsets, lam) == 0.0
    # at the least-squares solution the fitted-residual term vanishes and
    # the gap is minus the penalty
    eta_ls, *_ = np.linalg.lstsq(absorbed, problem.y, rcond=None)
    gap = duality_gap(eta_ls, problem.y, absorbed, offsets, lam, sigma=1.0)
    assert gap < 0.0

    assert infeasibility(np.zeros(design.n), absorbed, offsets, lam) == 0.0
    tiny = np.full(3, 1e-6)
    assert infeasibility(problem.y, absorbed, offsets, tiny) > 0.0


def test_scaling_covariance():
    rng = np.random.default_rng(6)
    for alpha in (0.5, 3.0):
        problem = _random_problem(rng, 35, [2, 2, 3, 1])
        scaled = GSlopeProblem(
            y=alpha * problem.y,
            design=problem.design,
            lam=problem.lam,
            sigma=alpha * problem.sigma,
        )
        fit = solve(problem)
        fit_scaled = solve(scaled)
        np.testing.assert_array_equal(fit.selected, fit_scaled.selected)
        np.testing.assert_allclose(
            alpha * fit.effects, fit_scaled.effects, atol=1e-6 * max(alpha, 1.0)
        )


def test_backtracking_agrees_with_fixed_step():
    rng = np.random.default_rng(7)
    problem = _random_problem(rng, 30, [2, 3, 2])
    fit_fixed = solve(problem, SolverConfig(step_rule="fixed"))
    fit_bt = solve(problem, SolverConfig(step_rule="backtracking"))
    assert fit_fixed.converged and fit_bt.converged
    np.testing.assert_allclose(fit_fixed.effects, fit_bt.effects, atol=1e-5)
    np.testing.assert_array_equal(fit_fixed.selected, fit_bt.selected)


def test_max_iter_exit_is_flagged():
    rng = np.random.default_rng(8)
    problem = _random_problem(rng, 40, [3, 2, 2], lam_scale=0.05)
    fit = solve(problem, SolverConfig(max_iter=1))
    assert not fit.converged


def test_orthogonal_path_agrees_with_general_solver():
    rng = np.random.default_rng(9)
    for _ in range(10):
        sizes = rng.integers(1, 5, size=rng.integers(2, 8))
        problem = _block_orthogonal_problem(rng, 60, sizes)
        assert cross_group_coherence(problem.design) <= 1e-8
        fit_fast = solve_orthogonal(problem)
        fit_gen = solve(problem)
        np.testing.assert_allclose(fit_fast.effects, fit_gen.effects, atol=1e-5)
        np.testing.assert_array_equal(fit_fast.selected, fit_gen.selected)


def test_orthogonal_support_is_top_of_scaled_data():
    rng = np.random.default_rng(10)
    for _ in range(10):
        sizes = rng.integers(1, 5, size=6)
        problem = _block_orthogonal_problem(rng, 50, sizes)
        fit = solve_orthogonal(problem)
        design = problem.design
        data = np.empty(design.m)
        ytil = design.matrix.T @ problem.y
        for i in range(design.m):
            data[i] = np.linalg.norm(ytil[design.block(i)]) / design.weights[i]
        order = np.argsort(-data, kind="stable")
        np.testing.assert_array_equal(
            np.sort(fit.selected), np.sort(order[: fit.selected.size])
        )


def test_orthogonal_explicit_two_group_example():
    # identity design, two singleton groups, data (5, 1): the reduced
    # problem is a plain sorted-l1 prox with solution (4, 0)
    design = standardize(np.eye(2), build_partition([0, 1], weights=np.ones(2)))
    y = np.array([5.0, 1.0])
    fit = solve_orthogonal(
        GSlopeProblem(y=y, design=design, lam=np.ones(2), sigma=1.0)
    )
    np.testing.assert_allclose(fit.effects, [4.0, 0.0], atol=1e-10)
    np.testing.assert_array_equal(fit.selected, [0])


def test_orthogonal_empty_selection_below_threshold():
    design = standardize(np.eye(3), build_partition([0, 1, 2], weights=np.ones(3)))
    y = np.array([0.5, -0.2, 0.1])
    fit = solve_orthogonal(
        GSlopeProblem(y=y, design=design, lam=np.ones(3), sigma=1.0)
    )
    assert fit.selected.size == 0
    np.testing.assert_allclose(fit.effects, np.zeros(3), atol=1e-12)


def test_orthogonal_path_rejects_coherent_designs():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(20, 6))
    design = standardize(X, build_partition([0, 0, 1, 1, 2, 2]))
    problem = GSlopeProblem(
        y=rng.normal(size=20), design=design, lam=np.ones(3), sigma=1.0
    )
    assert cross_group_coherence(design) > 1e-8
    with pytest.raises(ValueError):
        solve_orthogonal(problem)
    # check=False skips the guard and still returns a fit
    fit = solve_orthogonal(problem, check=False)
    assert fit.effects.shape == (3,)


def test_orthogonal_path_rejects_sigma_estimation():
    design = standardize(np.eye(2), build_partition([0, 1]))
    problem = GSlopeProblem(
        y=np.ones(2), design=design, lam=np.ones(2), sigma="estimate"
    )
    with pytest.raises(ValueError):
        solve_orthogonal(problem)
