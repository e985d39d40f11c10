"""Tests for the dense two-phase simplex."""

import numpy as np
import pytest
from scipy.optimize import linprog

from pnf_lab.errors import InfeasibleModelError, InvalidArgumentError, SolverFailureError
from pnf_lab.simplex import solve_linear_program


def _reference_optimum(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None):
    result = linprog(-np.asarray(c), A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, method="highs")
    assert result.status == 0
    return -result.fun


def test_box_constrained_maximum():
    solution = solve_linear_program(
        np.array([1.0, 2.0]), a_ub=np.eye(2), b_ub=np.array([3.0, 4.0])
    )
    assert solution.objective == pytest.approx(11.0)
    assert solution.x.tolist() == pytest.approx([3.0, 4.0])
    assert solution.iterations == 2


def test_matches_highs_on_random_programs():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n, m = int(rng.integers(2, 8)), int(rng.integers(1, 6))
        c = rng.uniform(-1.0, 1.0, size=n)
        a_ub = rng.uniform(0.0, 1.0, size=(m, n))
        b_ub = rng.uniform(1.0, 2.0, size=m)
        a_eq = np.ones((1, n))
        b_eq = np.ones(1)
        solution = solve_linear_program(c, a_ub, b_ub, a_eq, b_eq)
        expected = _reference_optimum(c, a_ub, b_ub, a_eq, b_eq)
        assert solution.objective == pytest.approx(expected, abs=1e-9)
        assert solution.max_equality_residual < 1e-9
        assert solution.max_inequality_violation < 1e-9
        assert solution.min_value >= -1e-12


def test_degenerate_program_terminates():
    c = np.array([10.0, -57.0, -9.0, -24.0])
    a_ub = np.array(
        [
            [0.5, -5.5, -2.5, 9.0],
            [0.5, -1.5, -0.5, 1.0],
            [1.0, 0.0, 0.0, 0.0],
        ]
    )
    b_ub = np.array([0.0, 0.0, 1.0])
    solution = solve_linear_program(c, a_ub, b_ub)
    assert solution.objective == pytest.approx(_reference_optimum(c, a_ub, b_ub), abs=1e-9)


def test_negative_right_hand_side_needs_phase_one():
    # x >= 2 and x <= 5, maximize -x
    solution = solve_linear_program(
        np.array([-1.0]), a_ub=np.array([[-1.0], [1.0]]), b_ub=np.array([-2.0, 5.0])
    )
    assert solution.objective == pytest.approx(-2.0)


def test_redundant_equalities_are_dropped():
    solution = solve_linear_program(
        np.array([1.0, 0.0]),
        a_eq=np.array([[1.0, 1.0], [2.0, 2.0]]),
        b_eq=np.array([1.0, 2.0]),
    )
    assert solution.objective == pytest.approx(1.0)
    assert solution.residuals()["max_equality_residual"] < 1e-12


def test_infeasible_program():
    with pytest.raises(InfeasibleModelError) as exc_info:
        solve_linear_program(
            np.array([1.0, 1.0]),
            a_ub=np.array([[1.0, 1.0]]),
            b_ub=np.array([0.5]),
            a_eq=np.array([[1.0, 1.0]]),
            b_eq=np.array([1.0]),
        )
    assert exc_info.value.diagnostics["phase_one_objective"] > 0


def test_unbounded_program():
    with pytest.raises(SolverFailureError, match="unbounded") as exc_info:
        solve_linear_program(
            np.array([1.0, 0.0]), a_ub=np.array([[1.0, -1.0]]), b_ub=np.array([1.0])
        )
    assert not isinstance(exc_info.value, InfeasibleModelError)


def test_iteration_cap():
    with pytest.raises(SolverFailureError) as exc_info:
        solve_linear_program(np.ones(3), a_ub=np.eye(3), b_ub=np.ones(3), max_iterations=1)
    assert exc_info.value.diagnostics["phase"] == "phase 2"
    assert exc_info.value.hint is not None


def test_argument_validation():
    with pytest.raises(InvalidArgumentError):
        solve_linear_program(np.ones(2), a_ub=np.ones((2, 2)), b_ub=np.ones(1))
    with pytest.raises(InvalidArgumentError):
        solve_linear_program(np.ones(2), a_ub=np.eye(2), b_ub=np.ones(2), max_iterations=0)
