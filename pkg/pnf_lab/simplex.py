"""Dense two-phase simplex with Bland's anti-cycling rule.

The optimality models are small (a few thousand columns at most) but are
highly degenerate, so the solver favors a rule that provably terminates over
speed. Problems are stated as::

    maximize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

Callers with ``>=`` rows negate them into ``<=`` form.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .errors import InfeasibleModelError, InvalidArgumentError, SolverFailureError


logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERATIONS = 1_000_000
PIVOT_TOLERANCE = 1e-10
FEASIBILITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class LpSolution:
    """Optimal point of a linear program and how well it satisfies the rows."""

    objective: float
    x: np.ndarray
    iterations: int
    max_equality_residual: float
    max_inequality_violation: float
    min_value: float

    def residuals(self) -> Dict[str, float]:
        return {
            "max_equality_residual": self.max_equality_residual,
            "max_inequality_violation": self.max_inequality_violation,
            "min_value": self.min_value,
        }


class _Tableau:
    """Constraint rows plus one reduced-cost row; the last column is the RHS."""

    def __init__(self, table: np.ndarray, basis: List[int], max_iterations: int) -> None:
        self.table = table
        self.basis = basis
        self.iterations = 0
        self.max_iterations = max_iterations

    @property
    def rows(self) -> int:
        return self.table.shape[0] - 1

    def set_costs(self, costs: np.ndarray) -> None:
        """Load ``costs`` (to be minimized) and price out the basic columns."""
        row = np.zeros(self.table.shape[1])
        row[: costs.size] = costs
        for i, column in enumerate(self.basis):
            if row[column] != 0.0:
                row -= row[column] * self.table[i]
        self.table[-1] = row

    def pivot(self, row: int, column: int) -> None:
        table = self.table
        table[row] /= table[row, column]
        factors = table[:, column].copy()
        factors[row] = 0.0
        table -= np.outer(factors, table[row])
        self.basis[row] = column

    def optimize(self, columns: int, phase: str) -> None:
        """Run Bland pivots over the first ``columns`` columns until optimal."""
        table = self.table
        while True:
            candidates = np.flatnonzero(table[-1, :columns] < -PIVOT_TOLERANCE)
            if candidates.size == 0:
                return
            if self.iterations >= self.max_iterations:
                message = (
                    f"Simplex {phase} stopped after {self.iterations} pivots "
                    "without reaching optimality"
                )
                raise SolverFailureError(
                    message,
                    diagnostics={
                        "phase": phase,
                        "iterations": self.iterations,
                        "objective": -float(table[-1, -1]),
                    },
                    hint="Raise the iteration cap or reduce n and k",
                )
            entering = int(candidates[0])
            column = table[:-1, entering]
            eligible = np.flatnonzero(column > PIVOT_TOLERANCE)
            if eligible.size == 0:
                message = f"Linear program is unbounded (column {entering})"
                raise SolverFailureError(
                    message, diagnostics={"phase": phase, "iterations": self.iterations}
                )
            ratios = table[eligible, -1] / column[eligible]
            best = ratios.min()
            ties = eligible[ratios <= best + PIVOT_TOLERANCE * max(1.0, abs(best))]
            leaving = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(leaving, entering)
            self.iterations += 1


def _as_matrix(a: Optional[np.ndarray], width: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, width))
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, width)


def solve_linear_program(
    c: np.ndarray,
    a_ub: Optional[np.ndarray] = None,
    b_ub: Optional[np.ndarray] = None,
    a_eq: Optional[np.ndarray] = None,
    b_eq: Optional[np.ndarray] = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> LpSolution:
    """Maximize ``c @ x`` over the polyhedron with ``x >= 0``.

    Raises:
        InfeasibleModelError: Phase 1 cannot drive the artificials to zero.
        SolverFailureError: Unbounded model or iteration cap reached.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    a_ub = _as_matrix(a_ub, n)
    a_eq = _as_matrix(a_eq, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    if a_ub.shape[0] != b_ub.size or a_eq.shape[0] != b_eq.size:
        message = "Constraint matrices and right-hand sides have different row counts"
        raise InvalidArgumentError(message)
    if max_iterations < 1:
        message = f"Simplex iteration cap must be positive, got {max_iterations}"
        raise InvalidArgumentError(message)

    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    m = m_ub + m_eq

    # Each <= row gets a slack; rows whose RHS must be flipped to stay
    # nonnegative (and all equalities) also get an artificial.
    rows = np.vstack([a_ub, a_eq])
    rhs = np.concatenate([b_ub, b_eq])
    slack_sign = np.concatenate([np.ones(m_ub), np.zeros(m_eq)])
    flip = rhs < 0
    rows[flip] *= -1.0
    rhs = np.abs(rhs)
    slack_sign[flip] *= -1.0
    needs_artificial = (slack_sign <= 0).nonzero()[0]

    width = n + m_ub + needs_artificial.size
    table = np.zeros((m + 1, width + 1))
    table[:m, :n] = rows
    table[:m, -1] = rhs
    basis = [0] * m
    for i in range(m_ub):
        table[i, n + i] = slack_sign[i]
        basis[i] = n + i
    artificial_start = n + m_ub
    for offset, i in enumerate(needs_artificial):
        table[i, artificial_start + offset] = 1.0
        basis[i] = artificial_start + offset

    tableau = _Tableau(table, basis, max_iterations)
    if needs_artificial.size:
        phase_one = np.zeros(width)
        phase_one[artificial_start:] = 1.0
        tableau.set_costs(phase_one)
        tableau.optimize(width, "phase 1")
        infeasibility = -float(tableau.table[-1, -1])
        if infeasibility > FEASIBILITY_TOLERANCE * max(1.0, float(rhs.max(initial=0.0))):
            message = "Linear program is infeasible"
            raise InfeasibleModelError(
                message,
                diagnostics={"phase_one_objective": infeasibility, "iterations": tableau.iterations},
            )
        _drive_out_artificials(tableau, artificial_start)
        tableau.table = np.delete(tableau.table, np.s_[artificial_start:width], axis=1)

    tableau.set_costs(-c)
    tableau.optimize(artificial_start, "phase 2")

    x = np.zeros(n)
    for i, column in enumerate(tableau.basis):
        if column < n:
            x[column] = tableau.table[i, -1]
    solution = _with_residuals(c, x, a_ub, b_ub, a_eq, b_eq, tableau.iterations)
    logger.debug(
        "Simplex finished: columns=%d rows=%d pivots=%d objective=%.12g",
        n,
        m,
        tableau.iterations,
        solution.objective,
    )
    return solution


def _drive_out_artificials(tableau: _Tableau, artificial_start: int) -> None:
    """Pivot zero-level artificials out of the basis and drop redundant rows."""
    redundant = []
    for i in range(tableau.rows):
        if tableau.basis[i] < artificial_start:
            continue
        candidates = np.flatnonzero(np.abs(tableau.table[i, :artificial_start]) > PIVOT_TOLERANCE)
        if candidates.size:
            tableau.pivot(i, int(candidates[0]))
        else:
            redundant.append(i)
    if redundant:
        logger.debug("Dropping %d redundant equality rows", len(redundant))
        tableau.table = np.delete(tableau.table, redundant, axis=0)
        tableau.basis = [b for i, b in enumerate(tableau.basis) if i not in set(redundant)]


def _with_residuals(
    c: np.ndarray,
    x: np.ndarray,
    a_ub: np.ndarray,
    b_ub: np.ndarray,
    a_eq: np.ndarray,
    b_eq: np.ndarray,
    iterations: int,
) -> LpSolution:
    eq_residual = float(np.abs(a_eq @ x - b_eq).max(initial=0.0))
    ub_violation = float(np.maximum(a_ub @ x - b_ub, 0.0).max(initial=0.0))
    return LpSolution(
        objective=float(c @ x),
        x=x,
        iterations=iterations,
        max_equality_residual=eq_residual,
        max_inequality_violation=ub_violation,
        min_value=float(x.min(initial=0.0)),
    )
