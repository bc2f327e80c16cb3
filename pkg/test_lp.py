"""
Tests for the dense two-phase simplex, checked against scipy's HiGHS solver.
"""

import numpy as np
import pytest
from scipy.optimize import linprog

from abrf.errors import InfeasibleError, SolverError, UnboundedError
from abrf.lp import linprog_simplex


def test_textbook_maximisation():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
    result = linprog_simplex([-3.0, -5.0], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    np.testing.assert_allclose(result.x, [2.0, 6.0], atol=1e-9)
    assert result.objective == pytest.approx(-36.0)
    assert result.pivots > 0


def test_equality_and_negative_rhs_need_phase_one():
    # min x + y s.t. x + y >= 2 (as -x - y <= -2), x - y = 0
    result = linprog_simplex([1.0, 1.0], [[-1, -1]], [-2], [[1, -1]], [0])
    np.testing.assert_allclose(result.x, [1.0, 1.0], atol=1e-9)
    assert result.objective == pytest.approx(2.0)


def test_infeasible():
    with pytest.raises(InfeasibleError):
        linprog_simplex([1.0], [[1.0]], [1.0], [[1.0]], [2.0])


def test_unbounded():
    with pytest.raises(UnboundedError):
        linprog_simplex([-1.0, 0.0], [[0.0, 1.0]], [1.0])


def test_pivot_limit():
    with pytest.raises(SolverError, match="pivot limit"):
        linprog_simplex([-3.0, -5.0], [[1, 0], [0, 2], [3, 2]], [4, 12, 18], max_pivots=1)


def test_redundant_equalities():
    result = linprog_simplex([1.0, 2.0], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    np.testing.assert_allclose(result.x, [1.0, 0.0], atol=1e-9)


def test_degenerate_problem_terminates():
    # classic cycling example for the largest-coefficient rule
    c = [-0.75, 150.0, -0.02, 6.0]
    A = [[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]]
    result = linprog_simplex(c, A, [0.0, 0.0, 1.0])
    assert result.objective == pytest.approx(-0.05, abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_random_problems_match_highs(seed):
    rng = np.random.default_rng(seed)
    n_vars, n_ub = 6, 5
    A_ub = rng.uniform(-1, 2, (n_ub, n_vars))
    b_ub = rng.uniform(-1, 5, n_ub)
    A_eq = np.ones((1, n_vars))
    b_eq = np.array([3.0])
    c = rng.normal(size=n_vars)
    reference = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if reference.status == 2:
        with pytest.raises(InfeasibleError):
            linprog_simplex(c, A_ub, b_ub, A_eq, b_eq)
        return
    assert reference.status == 0
    result = linprog_simplex(c, A_ub, b_ub, A_eq, b_eq)
    assert result.objective == pytest.approx(reference.fun, abs=1e-7)
    assert np.all(A_ub @ result.x <= b_ub + 1e-8)
    assert abs(result.x.sum() - 3.0) < 1e-8
