"""Linear-programming optimality certificates on the bounded lattice.

The optimal regular mechanism over the lattice vectors with depth ``k`` is
the solution of a linear program whose variables are the selection
probabilities. Symmetry collapses the variables to one per (canonical vector,
score class): ``x[v, l]`` is the probability of picking one particular
candidate sitting at level ``l`` of vector ``v``.

Two privacy row sets are available:

* ``relaxed``: for every non-maximal class, ``x[v, l] >= e^{-lε} x[v', 0]``
  where ``v'`` lifts that candidate to the top.
* ``full``: the one-step rows ``x[w, l'] <= e^ε x[v, l]`` where ``w`` raises
  one candidate of class ``l`` by one level, kept whenever ``w`` stays on the
  lattice. Raising a maximal candidate means lowering all of the others.

``full`` is the program of record for ratios, sweeps and probes. The relaxed
rows are implied by chains of one-step rows, so ``relaxed`` only matches
``full`` at or above the golden-ratio threshold, where it serves as the
certificate checked by the dual recurrence.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from .analysis import error_ratio, expected_error
from .errors import InfeasibleModelError, InvalidArgumentError, SolverFailureError
from .exact_dist import exact_pmf
from .lattice import DEFAULT_LATTICE_CAP, LatticeVector, enumerate_lattice
from .reports import CheckReport
from .scores import Mechanism, PrivacyParams
from .simplex import (
    DEFAULT_MAX_ITERATIONS,
    FEASIBILITY_TOLERANCE,
    LpSolution,
    solve_linear_program,
)


logger = logging.getLogger(__name__)

LP_FORMS = ("relaxed", "full")
PROBE_MARGIN = 1e-4
DUALITY_TOLERANCE = 1e-6
TIGHTNESS_TOLERANCE = 1e-9
GOLDEN_RATIO_THRESHOLD = math.log((3.0 + math.sqrt(5.0)) / 2.0)

Variable = Tuple[int, int]


@dataclass(frozen=True)
class LpModel:
    """Symmetry-reduced primal program, ``maximize objective @ x``."""

    n: int
    k: int
    params: PrivacyParams
    form: str
    vectors: List[LatticeVector]
    variables: List[Variable]
    objective: np.ndarray
    a_eq: sparse.csr_matrix
    b_eq: np.ndarray
    a_ub: sparse.csr_matrix
    b_ub: np.ndarray
    index: Dict[Variable, int] = field(repr=False, default_factory=dict)

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_equalities(self) -> int:
        return self.a_eq.shape[0]

    @property
    def num_privacy_rows(self) -> int:
        return self.a_ub.shape[0]

    def variable_name(self, column: int) -> str:
        vector, level = self.variables[column]
        return f"x_{vector}_{level}"

    def with_row(self, coefficients: Dict[int, float], rhs: float) -> "LpModel":
        """Return a copy with one extra ``<=`` row."""
        row = sparse.csr_matrix(
            (list(coefficients.values()), ([0] * len(coefficients), list(coefficients))),
            shape=(1, self.num_variables),
        )
        return LpModel(
            n=self.n,
            k=self.k,
            params=self.params,
            form=self.form,
            vectors=self.vectors,
            variables=self.variables,
            objective=self.objective,
            a_eq=self.a_eq,
            b_eq=self.b_eq,
            a_ub=sparse.vstack([self.a_ub, row], format="csr"),
            b_ub=np.append(self.b_ub, rhs),
            index=self.index,
        )


@dataclass(frozen=True)
class DualSolution:
    """Values of the dual recurrence keyed by ``(levels, level)``."""

    n: int
    k: int
    epsilon: float
    values: Dict[Tuple[Tuple[int, ...], int], float]
    objective: float

    def value(self, vector: LatticeVector, level: int) -> float:
        return self.values[(vector.levels, level)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "k": self.k,
            "epsilon": self.epsilon,
            "objective": self.objective,
            "values": [
                {"levels": list(levels), "level": level, "y": y}
                for (levels, level), y in sorted(self.values.items())
            ],
        }


@dataclass(frozen=True)
class GoldenRatioReport:
    epsilon: float
    threshold: float
    series_value: float
    holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "threshold": self.threshold,
            "series_value": self.series_value,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class ProbeReport:
    """Outcome of asking the program to beat permute-and-flip at one target."""

    target: Tuple[Tuple[int, ...], int]
    feasible: bool
    witness: Optional[Tuple[int, ...]] = None
    witness_excess: float = 0.0
    objective: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "target": {"levels": list(self.target[0]), "level": self.target[1]},
            "feasible": self.feasible,
            "witness": None if self.witness is None else list(self.witness),
            "witness_excess": self.witness_excess,
            "objective": self.objective,
        }


@dataclass(frozen=True)
class OptimalityRow:
    epsilon: float
    mechanism: str
    total_error: float
    optimal_error: float
    ratio: float


def _check_form(form: str) -> None:
    if form not in LP_FORMS:
        message = f"Unknown program form {form!r}; expected one of {', '.join(LP_FORMS)}"
        raise InvalidArgumentError(message)


def _check_lattice_params(params: PrivacyParams) -> None:
    if params.monotonic_quality:
        message = "Optimality models are defined for the standard neighbor relation only"
        raise InvalidArgumentError(message, hint="Drop --monotonic for optimality runs")


def _lift_to_top(vector: LatticeVector, level: int) -> LatticeVector:
    """Move one candidate of class ``level`` up to level 0."""
    return vector.moved(level, 0)


def build_lp(
    n: int,
    k: int,
    params: PrivacyParams,
    form: str = "full",
    cap: int = DEFAULT_LATTICE_CAP,
) -> LpModel:
    """Build the symmetry-reduced program for the optimal regular mechanism."""
    _check_form(form)
    _check_lattice_params(params)
    if form == "relaxed" and params.epsilon < GOLDEN_RATIO_THRESHOLD:
        logger.warning(
            "Relaxed program at eps=%.6g is below the threshold %.6f; its optimum "
            "understates the best private mechanism's error",
            params.epsilon,
            GOLDEN_RATIO_THRESHOLD,
        )
    vectors = enumerate_lattice(n, k, params.delta, cap)
    position = {vector.levels: i for i, vector in enumerate(vectors)}
    variables: List[Variable] = []
    for i, vector in enumerate(vectors):
        variables.extend((i, level) for level, _ in vector.classes())
    index = {variable: column for column, variable in enumerate(variables)}

    spacing = 2.0 * params.delta
    objective = np.zeros(len(variables))
    eq_rows: List[int] = []
    eq_cols: List[int] = []
    eq_vals: List[float] = []
    for i, vector in enumerate(vectors):
        for level, count in vector.classes():
            column = index[(i, level)]
            objective[column] = -vector.multiplicity * count * spacing * level
            eq_rows.append(i)
            eq_cols.append(column)
            eq_vals.append(float(count))

    decay = math.exp(-params.epsilon)
    ub_rows: List[int] = []
    ub_cols: List[int] = []
    ub_vals: List[float] = []

    def add_row(own: int, other: int, weight: float) -> None:
        # weight * x[other] - x[own] <= 0
        row = len(ub_rows) // 2
        ub_rows.extend((row, row))
        ub_cols.extend((own, other))
        ub_vals.extend((-1.0, weight))

    for i, vector in enumerate(vectors):
        for level, _ in vector.classes():
            own = index[(i, level)]
            if form == "relaxed":
                if level == 0:
                    continue
                lifted = position[_lift_to_top(vector, level).levels]
                add_row(own, index[(lifted, 0)], math.exp(-level * params.epsilon))
                continue
            if level > 0:
                raised = vector.moved(level, level - 1)
                add_row(own, index[(position[raised.levels], level - 1)], decay)
                continue
            raised = vector.moved(0, -1)
            if raised.max_level <= k:
                add_row(own, index[(position[raised.levels], 0)], decay)

    a_eq = sparse.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(len(vectors), len(variables)))
    a_ub = sparse.csr_matrix(
        (ub_vals, (ub_rows, ub_cols)), shape=(len(ub_rows) // 2, len(variables))
    )
    logger.debug(
        "Built %s program: n=%d k=%d variables=%d equalities=%d privacy_rows=%d",
        form,
        n,
        k,
        len(variables),
        a_eq.shape[0],
        a_ub.shape[0],
    )
    return LpModel(
        n=n,
        k=k,
        params=params,
        form=form,
        vectors=vectors,
        variables=variables,
        objective=objective,
        a_eq=a_eq,
        b_eq=np.ones(len(vectors)),
        a_ub=a_ub,
        b_ub=np.zeros(a_ub.shape[0]),
        index=index,
    )


def solve_lp(model: LpModel, max_iterations: int = DEFAULT_MAX_ITERATIONS) -> LpSolution:
    """Solve the program with the dense simplex.

    Raises:
        SolverFailureError: a residual of the returned point exceeds
            :data:`FEASIBILITY_TOLERANCE`.
    """
    solution = solve_linear_program(
        model.objective,
        a_ub=model.a_ub.toarray(),
        b_ub=model.b_ub,
        a_eq=model.a_eq.toarray(),
        b_eq=model.b_eq,
        max_iterations=max_iterations,
    )
    worst = max(
        solution.max_equality_residual,
        solution.max_inequality_violation,
        -solution.min_value,
    )
    if worst > FEASIBILITY_TOLERANCE:
        message = (
            f"Simplex returned a point with feasibility residual {worst:.3g} "
            f"(tolerance {FEASIBILITY_TOLERANCE:g})"
        )
        raise SolverFailureError(
            message,
            diagnostics={
                "form": model.form,
                "n": model.n,
                "k": model.k,
                "epsilon": model.params.epsilon,
                **solution.residuals(),
            },
        )
    logger.info(
        "Solved %s program n=%d k=%d eps=%.6g: objective=%.12g pivots=%d",
        model.form,
        model.n,
        model.k,
        model.params.epsilon,
        solution.objective,
        solution.iterations,
    )
    return solution


def _format_term(coefficient: float, name: str, first: bool) -> str:
    magnitude = f"{abs(coefficient):.17g} {name}"
    if first:
        return f"-{magnitude}" if coefficient < 0 else magnitude
    return f"- {magnitude}" if coefficient < 0 else f"+ {magnitude}"


def _format_row(row: sparse.csr_matrix, model: LpModel) -> str:
    terms = []
    for column, coefficient in zip(row.indices, row.data):
        terms.append(_format_term(float(coefficient), model.variable_name(column), not terms))
    return " ".join(terms)


def export_lp(model: LpModel) -> str:
    """Serialize the model in CPLEX LP text format."""
    lines = [
        f"\\ permute-and-flip optimality model n={model.n} k={model.k} "
        f"epsilon={model.params.epsilon:.17g} delta={model.params.delta:.17g} form={model.form}",
        "Maximize",
    ]
    terms = []
    for column, coefficient in enumerate(model.objective):
        if coefficient != 0.0:
            terms.append(_format_term(float(coefficient), model.variable_name(column), not terms))
    lines.append(" obj: " + (" ".join(terms) if terms else f"0 {model.variable_name(0)}"))
    lines.append("Subject To")
    for i in range(model.num_equalities):
        lines.append(f" sum_{i}: {_format_row(model.a_eq.getrow(i), model)} = {model.b_eq[i]:.17g}")
    for i in range(model.num_privacy_rows):
        lines.append(
            f" priv_{i}: {_format_row(model.a_ub.getrow(i), model)} <= {model.b_ub[i]:.17g}"
        )
    lines.append("Bounds")
    lines.extend(f" {model.variable_name(c)} >= 0" for c in range(model.num_variables))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _mechanism_error(mechanism: Mechanism, vector: LatticeVector, params: PrivacyParams) -> float:
    return expected_error(exact_pmf(mechanism, vector.entries, params), vector.entries)


def lattice_total_error(
    mechanism: Union[Mechanism, str],
    n: int,
    k: int,
    params: PrivacyParams,
    cap: int = DEFAULT_LATTICE_CAP,
) -> float:
    """Multiplicity-weighted sum of expected errors over the lattice."""
    mechanism = Mechanism.parse(mechanism)
    vectors = enumerate_lattice(n, k, params.delta, cap)
    return math.fsum(v.multiplicity * _mechanism_error(mechanism, v, params) for v in vectors)


def pf_lattice_objective(
    n: int, k: int, params: PrivacyParams, cap: int = DEFAULT_LATTICE_CAP
) -> float:
    """Summed permute-and-flip expected error; the program optimum negated."""
    return lattice_total_error(Mechanism.PF, n, k, params, cap)


def optimality_ratio(
    mechanism: Union[Mechanism, str],
    n: int,
    k: int,
    params: PrivacyParams,
    form: str = "full",
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> float:
    """Mechanism's summed error over the optimal program's; 1 when both are 0."""
    optimum = -solve_lp(build_lp(n, k, params, form), max_iterations).objective
    return error_ratio(lattice_total_error(mechanism, n, k, params), max(optimum, 0.0))


def optimality_sweep(
    mechanism: Union[Mechanism, str],
    n: int,
    k: int,
    epsilons: Sequence[float],
    delta: float = 1.0,
    form: str = "full",
    workers: int = 1,
) -> List[OptimalityRow]:
    """Optimality ratio at every ε, cells solved concurrently."""
    mechanism = Mechanism.parse(mechanism)

    def cell(epsilon: float) -> OptimalityRow:
        params = PrivacyParams(epsilon, delta)
        optimum = max(-solve_lp(build_lp(n, k, params, form)).objective, 0.0)
        total = lattice_total_error(mechanism, n, k, params)
        return OptimalityRow(epsilon, mechanism.value, total, optimum, error_ratio(total, optimum))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(cell, epsilons))


def dual_solve(
    n: int, k: int, params: PrivacyParams, cap: int = DEFAULT_LATTICE_CAP
) -> DualSolution:
    """Evaluate the dual recurrence in order of increasing number of maxima.

    For a vector with a single maximum the top class gets 0. Otherwise the
    top class takes ``-(1/n_*) * sum_t e^{-tε} y[w_t, t]`` where ``w_t`` moves
    one top candidate down to level ``t``. A class at level ``l`` gets
    ``2Δl + n_* * y[v, 0]``.
    """
    _check_lattice_params(params)
    vectors = sorted(enumerate_lattice(n, k, params.delta, cap), key=lambda v: v.n_best)
    spacing = 2.0 * params.delta
    values: Dict[Tuple[Tuple[int, ...], int], float] = {}
    for vector in vectors:
        n_best = vector.n_best
        top = 0.0
        if n_best > 1:
            total = math.fsum(
                math.exp(-t * params.epsilon) * values[(vector.moved(0, t).levels, t)]
                for t in range(1, k + 1)
            )
            top = -total / n_best
        values[(vector.levels, 0)] = top
        for level, _ in vector.classes():
            if level > 0:
                values[(vector.levels, level)] = spacing * level + n_best * top
    objective = math.fsum(
        v.multiplicity * v.n_best * values[(v.levels, 0)] for v in vectors
    )
    return DualSolution(n, k, params.epsilon, values, objective)


def golden_ratio_threshold(epsilon: float) -> GoldenRatioReport:
    """Compare ``sum_t t e^{-tε} = e^ε / (e^ε - 1)^2`` against 1."""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        message = f"Privacy budget must be positive and finite, got {epsilon}"
        raise InvalidArgumentError(message)
    series = math.exp(epsilon) / math.expm1(epsilon) ** 2
    return GoldenRatioReport(
        epsilon=epsilon,
        threshold=GOLDEN_RATIO_THRESHOLD,
        series_value=series,
        holds=epsilon >= GOLDEN_RATIO_THRESHOLD,
    )


def dual_feasibility_check(
    y: DualSolution,
    n: int,
    k: int,
    params: PrivacyParams,
    primal_optimum: Optional[float] = None,
    cap: int = DEFAULT_LATTICE_CAP,
) -> CheckReport:
    """Check tightness, the sign bounds, and (optionally) the duality gap.

    Sign bounds and the gap are only gated when ε is at or above the
    golden-ratio threshold; below it they are reported for information.
    """
    vectors = enumerate_lattice(n, k, params.delta, cap)
    spacing = 2.0 * params.delta
    tightness = 0.0
    bound_violation = 0.0
    rows = 0
    for vector in vectors:
        n_best = vector.n_best
        top = y.value(vector, 0)
        if n_best > 1:
            lhs = n_best * top + math.fsum(
                math.exp(-t * params.epsilon) * y.value(vector.moved(0, t), t)
                for t in range(1, k + 1)
            )
            tightness = max(tightness, abs(lhs))
            rows += 1
        else:
            tightness = max(tightness, abs(top))
        bound_violation = max(bound_violation, top, -spacing / n_best - top)
        for level, _ in vector.classes():
            if level == 0:
                continue
            low = y.value(vector, level)
            tightness = max(tightness, abs(low - n_best * top - spacing * level))
            bound_violation = max(bound_violation, -low, low - spacing * level)
            rows += 1

    bound_violation = max(bound_violation, 0.0)
    golden = golden_ratio_threshold(params.epsilon)
    gap = None if primal_optimum is None else abs(y.objective - primal_optimum)
    passed = tightness <= TIGHTNESS_TOLERANCE
    if golden.holds:
        passed = passed and bound_violation <= TIGHTNESS_TOLERANCE
        if gap is not None:
            passed = passed and gap <= DUALITY_TOLERANCE * max(1.0, abs(primal_optimum))
    return CheckReport(
        name="dual",
        passed=passed,
        max_violation=tightness if not golden.holds else max(tightness, bound_violation),
        checked=rows,
        details={
            "n": n,
            "k": k,
            "epsilon": params.epsilon,
            "tightness_max_residual": tightness,
            "bound_max_violation": bound_violation,
            "bounds_apply": golden.holds,
            "dual_objective": y.objective,
            "primal_optimum": primal_optimum,
            "duality_gap": gap,
        },
    )


def verify_dual(
    n: int,
    k: int,
    params: PrivacyParams,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> CheckReport:
    """Solve both sides and run :func:`dual_feasibility_check` with the gap."""
    primal = solve_lp(build_lp(n, k, params), max_iterations)
    return dual_feasibility_check(dual_solve(n, k, params), n, k, params, primal.objective)


def pareto_probe(
    n: int,
    k: int,
    params: PrivacyParams,
    target: Tuple[Sequence[int], int],
    margin: float = PROBE_MARGIN,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> ProbeReport:
    """Ask for a feasible mechanism strictly better than PF at ``target``.

    ``target`` is ``(levels, level)``. Better means less probability on a
    non-maximal class, or more on a maximal one, by ``margin``. When such a
    mechanism exists the report names the lattice vector where its expected
    error exceeds permute-and-flip's the most. Always posed on the full
    program, so a witness is itself a private mechanism.
    """
    levels, level = tuple(int(v) for v in target[0]), int(target[1])
    model = build_lp(n, k, params, "full")
    position = {vector.levels: i for i, vector in enumerate(model.vectors)}
    if levels not in position or (position[levels], level) not in model.index:
        message = f"Target {list(levels)} level {level} is not a class on this lattice"
        raise InvalidArgumentError(message)
    vector = model.vectors[position[levels]]
    column = model.index[(position[levels], level)]
    pf = exact_pmf(Mechanism.PF, vector.entries, params).as_array()
    pf_value = float(pf[vector.levels.index(level)])
    if level > 0:
        probe = model.with_row({column: 1.0}, pf_value - margin)
    else:
        probe = model.with_row({column: -1.0}, -(pf_value + margin))
    target_key = (levels, level)
    try:
        solution = solve_lp(probe, max_iterations)
    except InfeasibleModelError:
        logger.info("Pareto probe at %s is infeasible", target_key)
        return ProbeReport(target=target_key, feasible=False)

    spacing = 2.0 * params.delta
    witness = None
    excess = -math.inf
    for i, candidate in enumerate(model.vectors):
        error = math.fsum(
            count * spacing * lvl * solution.x[model.index[(i, lvl)]]
            for lvl, count in candidate.classes()
        )
        gap = error - _mechanism_error(Mechanism.PF, candidate, params)
        if gap > excess:
            witness, excess = candidate.levels, gap
    return ProbeReport(
        target=target_key,
        feasible=True,
        witness=witness,
        witness_excess=excess,
        objective=solution.objective,
    )
