import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpembed.conditioning import RankDeficientError
from lpembed.generators import generate_matrix, noisy_rhs
from lpembed.regression import (
    PipelineError,
    fast_l2_regression,
    fast_lp_regression,
    improve_embedding_dimension,
    l1_oracle_bruteforce,
    lp_objective,
    solve_l2_exact,
    solve_lp_small,
)
from lpembed.sparse_core import SparseMatrix
from lpembed.stable_rand import DomainError

ONES = np.ones((3, 1))
B3 = np.array([0.0, 1.0, 10.0])


def test_least_squares_mean():
    sol = solve_l2_exact(ONES, B3)
    assert sol.x_hat[0] == pytest.approx(11 / 3)


def test_least_squares_consistent_and_optimal():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((30, 4))
    assert solve_l2_exact(A, A @ rng.standard_normal(4)).objective <= 1e-10
    b = rng.standard_normal(30)
    x = solve_l2_exact(A, b).x_hat
    assert np.linalg.norm(2 * A.T @ (A @ x - b)) <= 1e-8 * np.linalg.norm(A.T @ b)


def test_least_squares_rank_deficient():
    A = np.ones((5, 2))
    with pytest.raises(RankDeficientError):
        solve_l2_exact(A, np.arange(5.0))


def test_objective_is_recomputed():
    A = np.random.default_rng(1).standard_normal((20, 3))
    b = np.random.default_rng(2).standard_normal(20)
    x = np.array([0.1, 0.2, -0.3])
    assert lp_objective(A, x, b, 1.5) == pytest.approx(np.sum(np.abs(A @ x - b) ** 1.5) ** (1 / 1.5))
    assert lp_objective(SparseMatrix.from_dense(A), x, b, 1.0) == pytest.approx(np.abs(A @ x - b).sum())


def test_irls_median():
    sol = solve_lp_small(ONES, B3, 1.0, epsilon=1e-4)
    assert sol.x_hat[0] == pytest.approx(1.0, abs=1e-4)
    assert sol.objective == pytest.approx(10.0, rel=1e-4)


def test_irls_p2_is_least_squares():
    A = np.random.default_rng(3).standard_normal((40, 3))
    b = np.random.default_rng(4).standard_normal(40)
    assert solve_lp_small(A, b, 2.0).objective == pytest.approx(solve_l2_exact(A, b).objective, rel=1e-8)


def test_irls_against_bruteforce_oracle():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((100, 3))
    b = A @ rng.standard_normal(3) + rng.standard_cauchy(100)
    eps = 0.01
    sol = solve_lp_small(A, b, 1.0, epsilon=eps)
    assert sol.objective <= (1 + eps) * l1_oracle_bruteforce(A, b).objective
    assert sol.pipeline_trace[0]["monotone_violations"] == 0


@given(st.integers(0, 2**31), st.sampled_from([1.0, 1.3, 1.7]))
@settings(max_examples=15, deadline=None)
def test_irls_never_increases_smoothed_objective(seed, p):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((40, 3))
    b = rng.standard_cauchy(40)
    sol = solve_lp_small(A, b, p, epsilon=1e-3)
    assert sol.pipeline_trace[0]["monotone_violations"] == 0
    assert sol.objective <= lp_objective(A, solve_l2_exact(A, b).x_hat, b, p) + 1e-12


@given(st.integers(0, 2**31), st.floats(1e-3, 1e3), st.sampled_from([1.0, 1.5]))
@settings(max_examples=15, deadline=None)
def test_irls_scale_equivariance(seed, c, p):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((30, 2))
    b = rng.standard_cauchy(30)
    f1 = solve_lp_small(A, b, p, epsilon=1e-3).objective
    f2 = solve_lp_small(A, c * b, p, epsilon=1e-3).objective
    assert f2 == pytest.approx(c * f1, rel=2e-3)


def test_irls_domain():
    with pytest.raises(DomainError):
        solve_lp_small(ONES, B3, 2.5)


def test_oracle_examples():
    assert l1_oracle_bruteforce(ONES, B3).objective == pytest.approx(10.0)
    rng = np.random.default_rng(6)
    A = rng.standard_normal((12, 2))
    assert l1_oracle_bruteforce(A, A @ np.array([1.0, -2.0])).objective <= 1e-10
    with pytest.raises(ValueError):
        l1_oracle_bruteforce(np.ones((300, 2)), np.ones(300))


def test_oracle_and_irls_cross_validate():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((50, 2))
    b = rng.standard_cauchy(50)
    oracle = l1_oracle_bruteforce(A, b).objective
    irls = solve_lp_small(A, b, 1.0, epsilon=0.01).objective
    assert oracle <= irls + 1e-12 <= 1.01 * oracle + 1e-12


def test_oracle_matches_linear_program():
    # independent check via an LP: min sum t  s.t.  -t <= A x - b <= t
    from scipy.optimize import linprog

    rng = np.random.default_rng(8)
    n, d = 25, 2
    A = rng.standard_normal((n, d))
    b = rng.standard_cauchy(n)
    c = np.r_[np.zeros(d), np.ones(n)]
    I = np.eye(n)
    A_ub = np.block([[A, -I], [-A, -I]])
    res = linprog(c, A_ub=A_ub, b_ub=np.r_[b, -b], bounds=[(None, None)] * d + [(0, None)] * n)
    assert l1_oracle_bruteforce(A, b).objective == pytest.approx(res.fun, rel=1e-8)


def test_fast_l2_consistent_and_deterministic():
    A, b = generate_matrix("consistent_pair", 3000, 4, 0.5, seed=1)
    eps = 0.5
    sol = fast_l2_regression(A, b, eps, seed=3)
    assert sol.objective <= eps * np.linalg.norm(b)
    again = fast_l2_regression(A, b, eps, seed=3)
    assert np.array_equal(sol.x_hat, again.x_hat)
    assert json.loads(sol.to_json(3))["seed"] == 3


@pytest.mark.slow
def test_fast_l2_ratio_success_rate():
    A, _ = generate_matrix("random_sparse", 10**5, 10, 1.0, seed=0)
    b, _ = noisy_rhs(A, seed=1, noise="gaussian")
    f_star = solve_l2_exact(A, b).objective
    good = sum(fast_l2_regression(A, b, 0.5, 0.1, seed=k, retries=1).objective / f_star <= 1.5 for k in range(100))
    assert good >= 85


def test_fast_l2_domain():
    with pytest.raises(DomainError):
        fast_l2_regression(np.eye(3), np.ones(3), 1.5)


@pytest.mark.parametrize("p", [1.0, 1.5])
def test_fast_lp_consistent_system(p):
    A, b = generate_matrix("consistent_pair", 2000, 3, 1.0, seed=2)
    sol = fast_lp_regression(A, b, p, 0.3, seed=0)
    assert sol.objective <= 1e-8 * np.linalg.norm(b, ord=p)
    assert any(st.get("note") for st in sol.pipeline_trace[0]["stages"])


def test_fast_lp_trace_and_determinism():
    A, _ = generate_matrix("random_sparse", 2000, 3, 1.0, seed=3)
    b, _ = noisy_rhs(A, seed=4)
    sol = fast_lp_regression(A, b, 1.0, 0.3, seed=5)
    stages = [st["stage"] for st in sol.pipeline_trace[0]["stages"]]
    assert stages == ["sketch", "condition", "sample", "solve"]
    assert sol.objective == pytest.approx(lp_objective(A, sol.x_hat, b, 1.0))
    assert np.array_equal(sol.x_hat, fast_lp_regression(A, b, 1.0, 0.3, seed=5).x_hat)


def test_fast_lp_with_real_subsampling_is_close_to_optimal():
    # a small sampling constant forces genuine subsampling of the rows
    A, _ = generate_matrix("random_sparse", 150, 3, 1.0, seed=6)
    b, _ = noisy_rhs(A, seed=7)
    sol = fast_lp_regression(A, b, 1.0, 0.3, seed=8, sample_constant=0.0005)
    realized = [r["stages"][2]["s_realized"] for r in sol.pipeline_trace]
    assert max(realized) < 150
    assert sol.objective <= 1.3 * l1_oracle_bruteforce(A, b).objective


def test_fast_lp_rounding_and_sketched_leverage():
    A, _ = generate_matrix("spiky_leverage", 3000, 3, 1.0, seed=9)
    b, _ = noisy_rhs(A, seed=10)
    sol = fast_lp_regression(A, b, 1.0, 0.3, seed=1, conditioning="rounding", leverage="sketched", retries=1)
    ref = solve_lp_small(A, b, 1.0, epsilon=1e-3).objective
    assert sol.objective <= 1.3 * ref


def test_fast_lp_domain_and_pipeline_errors():
    with pytest.raises(DomainError):
        fast_lp_regression(np.eye(3), np.ones(3), 2.0, 0.3)
    with pytest.raises(DomainError):
        fast_lp_regression(np.eye(3), np.ones(3), 1.0, 0.6)
    A = np.ones((50, 2))
    with pytest.raises(PipelineError) as e:
        fast_lp_regression(A, np.arange(50.0), 1.0, 0.3)
    assert e.value.stage == "condition"


def test_two_stage_sampling_trace():
    A, _ = generate_matrix("spiky_leverage", 5000, 3, 1.0, seed=11)
    S = improve_embedding_dimension(A, 1.0, 0.3, seed=2)
    tr = S.meta["trace"]
    assert tr["stage4_kappa_bar_hat"] <= tr["stage2_kappa_bar_hat"]
    assert tr["final"]["s_realized"] == S.s_realized
    assert tr["kappa_bar_target"] == pytest.approx(6 * 3**2)
    assert S.target_epsilon == 0.3
