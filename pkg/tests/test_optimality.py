"""Tests for the lattice optimality programs and the dual recurrence."""

import logging
import math

import numpy as np
import pytest

from pnf_lab import optimality
from pnf_lab.errors import InvalidArgumentError, SolverFailureError
from pnf_lab.optimality import (
    GOLDEN_RATIO_THRESHOLD,
    build_lp,
    dual_feasibility_check,
    dual_solve,
    export_lp,
    golden_ratio_threshold,
    lattice_total_error,
    optimality_ratio,
    optimality_sweep,
    pareto_probe,
    pf_lattice_objective,
    solve_lp,
    verify_dual,
)
from pnf_lab.scores import Mechanism, PrivacyParams
from pnf_lab.simplex import LpSolution


INV_E = math.exp(-1.0)


class TestBuildLp:
    def test_two_candidates_relaxed(self, unit_params):
        model = build_lp(2, 1, unit_params, form="relaxed")
        assert model.num_variables == 3
        assert model.num_equalities == 2
        assert model.num_privacy_rows == 1
        assert model.objective.tolist() == [0.0, 0.0, -4.0]

    def test_two_candidates_full(self, unit_params):
        assert build_lp(2, 1, unit_params, form="full").num_privacy_rows == 2

    @pytest.mark.parametrize(("form", "rows"), [("relaxed", 2), ("full", 3)])
    def test_three_candidates(self, unit_params, form, rows):
        model = build_lp(3, 1, unit_params, form=form)
        assert model.num_variables == 5
        assert model.num_equalities == 3
        assert model.num_privacy_rows == rows

    def test_rejects_unknown_form(self, unit_params):
        with pytest.raises(InvalidArgumentError, match="relaxed, full"):
            build_lp(2, 1, unit_params, form="tight")

    def test_rejects_monotonic_neighbors(self):
        with pytest.raises(InvalidArgumentError) as exc_info:
            build_lp(2, 1, PrivacyParams(1.0, 1.0, monotonic_quality=True))
        assert "--monotonic" in exc_info.value.hint

    def test_with_row_appends_inequality(self, unit_params):
        model = build_lp(2, 1, unit_params, form="relaxed")
        probe = model.with_row({2: 1.0}, 0.1)
        assert probe.num_privacy_rows == 2
        assert probe.b_ub.tolist() == [0.0, 0.1]
        assert model.num_privacy_rows == 1

    def test_defaults_to_full_form(self, unit_params):
        assert build_lp(3, 1, unit_params).form == "full"

    def test_relaxed_form_warns_below_threshold(self, caplog):
        with caplog.at_level(logging.WARNING, logger="pnf_lab.optimality"):
            build_lp(2, 1, PrivacyParams(0.5), form="relaxed")
            build_lp(2, 1, PrivacyParams(0.5))
        warnings = [r for r in caplog.records if r.levelno == logging.WARNING]
        assert len(warnings) == 1
        assert "understates" in warnings[0].getMessage()


class TestSolveLp:
    @pytest.mark.parametrize("form", ["relaxed", "full"])
    def test_two_candidates_unit_budget(self, unit_params, form):
        solution = solve_lp(build_lp(2, 1, unit_params, form=form))
        assert solution.objective == pytest.approx(-2.0 * INV_E, abs=1e-12)
        assert solution.x[2] == pytest.approx(INV_E / 2.0, abs=1e-12)

    def test_two_candidates_larger_budget(self):
        solution = solve_lp(build_lp(2, 1, PrivacyParams(2.0)))
        assert solution.objective == pytest.approx(-2.0 * math.exp(-2.0), abs=1e-8)

    @pytest.mark.parametrize(("n", "k"), [(3, 1), (3, 2), (4, 2)])
    def test_pf_attains_relaxed_optimum_above_threshold(self, unit_params, n, k):
        solution = solve_lp(build_lp(n, k, unit_params, form="relaxed"))
        assert -solution.objective == pytest.approx(
            pf_lattice_objective(n, k, unit_params), rel=1e-8
        )
        assert solution.max_equality_residual < 1e-9
        assert solution.max_inequality_violation < 1e-9

    def test_rejects_point_outside_tolerance(self, unit_params, monkeypatch):
        def sloppy(objective, **_kwargs):
            x = np.zeros(objective.size)
            return LpSolution(0.0, x, 3, 2e-6, 0.0, 0.0)

        monkeypatch.setattr(optimality, "solve_linear_program", sloppy)
        with pytest.raises(SolverFailureError, match="feasibility residual") as exc_info:
            solve_lp(build_lp(2, 1, unit_params))
        assert exc_info.value.diagnostics["max_equality_residual"] == 2e-6
        assert exc_info.value.diagnostics["form"] == "full"

    def test_rejects_negative_probabilities(self, unit_params, monkeypatch):
        def negative(objective, **_kwargs):
            return LpSolution(0.0, np.zeros(objective.size), 1, 0.0, 0.0, -1e-6)

        monkeypatch.setattr(optimality, "solve_linear_program", negative)
        with pytest.raises(SolverFailureError):
            solve_lp(build_lp(2, 1, unit_params))


def test_export_lp_text(unit_params):
    text = export_lp(build_lp(2, 1, unit_params, form="relaxed"))
    lines = text.splitlines()
    assert lines[0].startswith("\\ permute-and-flip optimality model n=2 k=1")
    assert lines[1] == "Maximize"
    assert lines[2] == " obj: -4 x_1_1"
    assert " sum_0: 2 x_0_0 = 1" in lines
    assert " sum_1: 1 x_1_0 + 1 x_1_1 = 1" in lines
    priv = [line for line in lines if line.startswith(" priv_0:")]
    assert len(priv) == 1
    assert priv[0].endswith("<= 0")
    assert "- 1 x_1_1" in priv[0] or "-1 x_1_1" in priv[0]
    assert lines[-1] == "End"
    assert " x_1_1 >= 0" in lines


class TestLatticeErrors:
    def test_pf_total(self, unit_params):
        assert pf_lattice_objective(2, 1, unit_params) == pytest.approx(2.0 * INV_E)

    def test_em_ratio(self, unit_params):
        ratio = optimality_ratio(Mechanism.EM, 2, 1, unit_params)
        assert ratio == pytest.approx(2.0 / (1.0 + INV_E), rel=1e-9)

    def test_pf_ratio_is_one(self, unit_params):
        assert optimality_ratio("pf", 3, 2, unit_params) == pytest.approx(1.0, rel=1e-8)

    def test_em_total_exceeds_pf(self, unit_params):
        assert lattice_total_error("em", 3, 2, unit_params) > pf_lattice_objective(
            3, 2, unit_params
        )

    def test_sweep(self):
        rows = optimality_sweep("em", 2, 1, [1.0, 2.0], workers=2)
        assert [row.epsilon for row in rows] == [1.0, 2.0]
        assert rows[0].ratio == pytest.approx(2.0 / (1.0 + INV_E), rel=1e-9)
        assert all(row.mechanism == "em" for row in rows)

    def test_pf_is_near_optimal_below_threshold(self):
        ratio = optimality_ratio("pf", 4, 4, PrivacyParams(0.5))
        assert 1.0 - 1e-9 <= ratio <= 1.02

    def test_relaxed_program_overstates_ratio_below_threshold(self):
        params = PrivacyParams(0.5)
        full = optimality_ratio("pf", 4, 4, params)
        relaxed = optimality_ratio("pf", 4, 4, params, form="relaxed")
        assert relaxed > full + 0.1

    def test_tiny_budget_ratios_are_close_to_one(self):
        params = PrivacyParams(0.01)
        for mechanism in ("pf", "em"):
            assert optimality_ratio(mechanism, 4, 4, params) <= 1.05

    @pytest.mark.slow
    def test_em_ratio_grows_with_budget(self):
        rows = optimality_sweep("em", 4, 4, [0.25, 0.5, 1.0, 2.0, 4.0], workers=2)
        ratios = [row.ratio for row in rows]
        assert all(later >= earlier - 1e-9 for earlier, later in zip(ratios, ratios[1:]))
        assert ratios[3] >= 1.5


class TestDual:
    def test_hand_values(self, unit_params):
        dual = dual_solve(2, 1, unit_params)
        assert dual.values[((0, 0), 0)] == pytest.approx(-INV_E)
        assert dual.values[((0, 1), 0)] == 0.0
        assert dual.values[((0, 1), 1)] == pytest.approx(2.0)
        assert dual.objective == pytest.approx(-2.0 * INV_E)

    def test_three_candidates_matches_pf(self, unit_params):
        dual = dual_solve(3, 1, unit_params)
        assert -dual.objective == pytest.approx(pf_lattice_objective(3, 1, unit_params))

    @pytest.mark.parametrize(("n", "k", "epsilon"), [(2, 1, 1.0), (3, 1, 1.0), (3, 2, 2.0)])
    def test_verify_dual_passes_above_threshold(self, n, k, epsilon):
        report = verify_dual(n, k, PrivacyParams(epsilon))
        assert report.passed
        assert report.details["bounds_apply"]
        assert report.details["duality_gap"] < 1e-6

    def test_below_threshold_bounds_are_informational(self):
        params = PrivacyParams(0.5)
        report = dual_feasibility_check(dual_solve(3, 2, params), 3, 2, params)
        assert report.details["bounds_apply"] is False
        assert report.details["duality_gap"] is None
        assert report.passed

    def test_to_dict_is_sorted(self, unit_params):
        payload = dual_solve(2, 1, unit_params).to_dict()
        assert [entry["levels"] for entry in payload["values"]] == [[0, 0], [0, 1], [0, 1]]


@pytest.mark.slow
@pytest.mark.parametrize("epsilon", [1.0, 1.5, 2.0])
@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_pf_is_optimal_above_threshold(n, k, epsilon):
    params = PrivacyParams(epsilon)
    report = verify_dual(n, k, params)
    optimum = report.details["primal_optimum"]
    assert abs(optimum + pf_lattice_objective(n, k, params)) <= 1e-6 * max(1.0, abs(optimum))
    assert report.passed
    assert report.details["duality_gap"] <= 1e-6 * max(1.0, abs(optimum))


class TestGoldenRatio:
    def test_threshold_constant(self):
        assert GOLDEN_RATIO_THRESHOLD == pytest.approx(0.962424, abs=1e-6)

    def test_series_at_threshold(self):
        report = golden_ratio_threshold(GOLDEN_RATIO_THRESHOLD)
        assert report.series_value == pytest.approx(1.0, abs=1e-5)
        assert report.holds

    @pytest.mark.parametrize(
        ("epsilon", "series", "holds"), [(2.0, 0.18102, True), (0.5, 3.91771, False)]
    )
    def test_series_values(self, epsilon, series, holds):
        report = golden_ratio_threshold(epsilon)
        assert report.series_value == pytest.approx(series, abs=1e-4)
        assert report.holds is holds

    def test_rejects_bad_budget(self):
        with pytest.raises(InvalidArgumentError):
            golden_ratio_threshold(0.0)


class TestParetoProbe:
    def test_two_candidates_cannot_beat_pf(self, unit_params):
        report = pareto_probe(2, 1, unit_params, ((0, 1), 1))
        assert report.feasible is False
        assert report.witness is None

    def test_probe_at_top_class_is_infeasible(self, unit_params):
        assert pareto_probe(2, 1, unit_params, ((0, 1), 0)).feasible is False

    def test_lifted_to_full_tie_is_infeasible(self, unit_params):
        assert pareto_probe(3, 2, unit_params, ((0, 0, 1), 1)).feasible is False

    def test_improvement_costs_elsewhere(self, unit_params):
        report = pareto_probe(3, 2, unit_params, ((0, 1, 1), 1))
        assert report.feasible
        assert report.witness is not None
        assert report.witness_excess > 0
        assert report.to_dict()["target"] == {"levels": [0, 1, 1], "level": 1}

    def test_rejects_unknown_target(self, unit_params):
        with pytest.raises(InvalidArgumentError, match="not a class"):
            pareto_probe(2, 1, unit_params, ((0, 1), 2))
