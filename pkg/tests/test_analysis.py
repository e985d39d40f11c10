"""Tests for error metrics, dominance and worst-case curves."""

import math

import pytest

from pnf_lab.analysis import (
    check_dominance,
    error_ccdf,
    error_profile,
    error_ratio,
    expected_error,
    log_expected_error,
    lower_bound,
    noisy_max_comparison,
    noisy_max_expected_error,
    utility_bounds,
    worst_case_by_n,
    worst_case_curve,
    worst_case_maximize,
    worst_case_scores,
    worst_case_value,
)
from pnf_lab.errors import InvalidArgumentError
from pnf_lab.exact_dist import pmf_exponential, pmf_pf_dp
from pnf_lab.scores import Mechanism, PrivacyParams


INV_E = math.exp(-1.0)


class TestExpectedError:
    def test_pf_two_candidates(self, two_candidate_scores, two_params):
        dist = pmf_pf_dp(two_candidate_scores, two_params)
        assert expected_error(dist, two_candidate_scores) == pytest.approx(INV_E, abs=1e-12)

    def test_em_two_candidates(self, two_candidate_scores, two_params):
        dist = pmf_exponential(two_candidate_scores, two_params)
        expected = 2.0 * INV_E / (1.0 + INV_E)
        assert expected_error(dist, two_candidate_scores) == pytest.approx(expected, abs=1e-12)

    def test_length_mismatch(self, two_params):
        dist = pmf_pf_dp((0.0, -1.0, -2.0), two_params)
        with pytest.raises(InvalidArgumentError, match="3 entries"):
            expected_error(dist, (0.0, -1.0))

    def test_ccdf(self, two_candidate_scores, two_params):
        dist = pmf_pf_dp(two_candidate_scores, two_params)
        assert error_ccdf(dist, two_candidate_scores, 0.0) == 1.0
        assert error_ccdf(dist, two_candidate_scores, 2.0) == pytest.approx(INV_E / 2.0)
        assert error_ccdf(dist, two_candidate_scores, 2.5) == 0.0
        with pytest.raises(InvalidArgumentError):
            error_ccdf(dist, two_candidate_scores, -1.0)

    def test_profile_lists_every_distinct_gap(self, two_params):
        q = (0.0, -1.0, -1.0, -3.0)
        profile = error_profile(pmf_pf_dp(q, two_params), q)
        assert [t for t, _ in profile.ccdf] == [0.0, 1.0, 3.0]
        assert profile.to_dict()["ccdf"][0] == {"t": 0.0, "probability": 1.0}


def test_error_ratio_edge_cases():
    assert error_ratio(0.0, 0.0) == 1.0
    assert error_ratio(1.0, 0.0) == math.inf
    assert error_ratio(3.0, 2.0) == 1.5


class TestLogExpectedError:
    @pytest.mark.parametrize("mechanism", ["pf", "em"])
    def test_matches_exact_error(self, unit_params, mechanism):
        q = (0.0, -1.0, -3.0, -0.5)
        dist = pmf_pf_dp(q, unit_params) if mechanism == "pf" else pmf_exponential(q, unit_params)
        assert math.exp(log_expected_error(mechanism, q, unit_params)) == pytest.approx(
            expected_error(dist, q), rel=1e-10
        )

    def test_stays_finite_when_the_error_underflows(self, unit_params):
        q = (0.0, -2000.0)
        assert expected_error(pmf_pf_dp(q, unit_params), q) == 0.0
        expected = math.log(2000.0) - 1000.0 - math.log(2.0)
        log_error = log_expected_error(Mechanism.PF, q, unit_params)
        assert log_error == pytest.approx(expected, rel=1e-12)
        assert log_expected_error("em", q, unit_params) == pytest.approx(
            math.log(2000.0) - 1000.0, rel=1e-12
        )

    def test_all_tied(self, unit_params):
        assert log_expected_error("pf", (1.0, 1.0), unit_params) == -math.inf

    def test_noisy_max_is_not_supported(self, unit_params):
        with pytest.raises(InvalidArgumentError):
            log_expected_error("rnm", (0.0, -1.0), unit_params)


class TestDominance:
    def test_two_candidates(self, two_candidate_scores, two_params):
        report = check_dominance(two_candidate_scores, two_params)
        assert report.holds
        assert report.ratio == pytest.approx(2.0 / (1.0 + INV_E), rel=1e-10)
        t, pf, em = report.ccdf[-1]
        assert t == 2.0
        assert pf == pytest.approx(0.183940, abs=1e-6)
        assert em == pytest.approx(0.268941, abs=1e-6)

    def test_all_ties_have_zero_error(self, unit_params):
        report = check_dominance((1.0, 1.0), unit_params)
        assert report.holds
        assert report.pf_expected_error == 0.0
        assert report.ratio == 1.0


class TestWorstCase:
    def test_closed_forms_match_pmfs(self, two_params):
        assert worst_case_value("em", 0.5, 3, two_params) == pytest.approx(0.346574, abs=1e-6)
        assert worst_case_value("pf", 0.5, 3, two_params) == pytest.approx(0.288811, abs=1e-6)
        q = worst_case_scores(0.5, 3, two_params)
        assert expected_error(pmf_pf_dp(q, two_params), q) == pytest.approx(
            worst_case_value("pf", 0.5, 3, two_params), rel=1e-12
        )
        assert expected_error(pmf_exponential(q, two_params), q) == pytest.approx(
            worst_case_value("em", 0.5, 3, two_params), rel=1e-12
        )

    @pytest.mark.parametrize(("p", "n"), [(1e-3, 5), (1e-7, 40), (0.3, 6)])
    def test_pf_closed_form_is_stable_for_small_coins(self, unit_params, p, n):
        q = worst_case_scores(p, n, unit_params)
        exact = expected_error(pmf_pf_dp(q, unit_params), q)
        assert worst_case_value("pf", p, n, unit_params) == pytest.approx(exact, rel=1e-9)

    def test_zero_at_the_ends(self, unit_params):
        assert worst_case_value("pf", 1.0, 4, unit_params) == 0.0
        assert worst_case_value("em", 0.2, 1, unit_params) == 0.0

    @pytest.mark.parametrize("p", [0.0, -0.1, 1.5])
    def test_rejects_bad_p(self, unit_params, p):
        with pytest.raises(InvalidArgumentError):
            worst_case_value("pf", p, 2, unit_params)

    def test_em_half_coin(self, unit_params):
        assert worst_case_value("em", 0.5, 2, unit_params) == pytest.approx(0.462098, abs=1e-6)

    def test_pf_maximizer_two_candidates(self, unit_params):
        p_star, value = worst_case_maximize(Mechanism.PF, 2, unit_params)
        assert p_star == pytest.approx(INV_E, abs=1e-4)
        assert value == pytest.approx(INV_E, rel=1e-8)

    def test_pf_worst_case_below_em(self, unit_params):
        for n in (2, 3, 10):
            pf = worst_case_maximize("pf", n, unit_params)[1]
            em = worst_case_maximize("em", n, unit_params)[1]
            assert pf < em

    def test_maximize_needs_two_candidates(self, unit_params):
        with pytest.raises(InvalidArgumentError):
            worst_case_maximize("pf", 1, unit_params)

    def test_curve(self, unit_params):
        curve = worst_case_curve("em", 2, unit_params, [0.1, 0.5, 1.0])
        assert [p for p, _ in curve.points] == [0.1, 0.5, 1.0]
        assert curve.points[-1][1] == 0.0
        assert curve.maximizer[1] >= max(v for _, v in curve.points)


def test_utility_bounds(unit_params):
    bounds = utility_bounds(1024, unit_params, 2.0)
    assert bounds.expected_bound == pytest.approx(13.8629, abs=1e-4)
    assert bounds.tail_threshold == pytest.approx(bounds.expected_bound + 4.0)
    assert bounds.tail_bound == pytest.approx(math.exp(-2.0))


@pytest.mark.parametrize(
    ("n", "bound", "exact"), [(2, 0.346574, 0.346574), (4, 0.693147, 0.877269)]
)
def test_lower_bound(unit_params, n, bound, exact):
    report = lower_bound(n, unit_params)
    assert report.holds
    assert report.bound == pytest.approx(bound, abs=1e-6)
    assert report.exact == pytest.approx(exact, abs=1e-6)
    assert report.ratio_to_upper >= 0.25 - 1e-12


def test_lower_bound_is_reached_by_pf(unit_params):
    for n in (2, 5, 20):
        q = worst_case_scores(1.0 / n, n, unit_params)
        exact = expected_error(pmf_pf_dp(q, unit_params), q)
        assert exact == pytest.approx(lower_bound(n, unit_params).exact, rel=1e-9)


def test_worst_case_by_n(unit_params):
    rows = worst_case_by_n([2, 8], unit_params)
    assert [row.n for row in rows] == [2, 8]
    for row in rows:
        assert row.lower_bound <= row.pf_worst <= row.em_worst <= row.upper_bound + 1e-12


class TestNoisyMax:
    def test_two_candidates(self, unit_params):
        value = noisy_max_expected_error(-2.0, 2, unit_params)
        assert value == pytest.approx(2.0 * 0.75 * INV_E, abs=1e-5)

    def test_rejects_positive_offset(self, unit_params):
        with pytest.raises(InvalidArgumentError):
            noisy_max_expected_error(0.5, 2, unit_params)

    def test_comparison_rows(self):
        params = PrivacyParams(1.0)
        rows = noisy_max_comparison([0.0, -2.0], 3, params)
        assert rows[0].em_error == rows[0].pf_error == rows[0].rnm_error == 0.0
        assert rows[1].pf_error <= rows[1].em_error
