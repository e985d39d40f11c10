"""Tests for the verification suites."""

import pytest

from pnf_lab.errors import InvalidArgumentError
from pnf_lab.reports import CheckReport, combine_reports
from pnf_lab.scores import Mechanism, PrivacyParams
from pnf_lab.verification import (
    verify_dominance_suite,
    verify_g_monotonicity,
    verify_oracles,
    verify_privacy_on_lattice,
    verify_recurrence_suite,
    verify_regularity,
)


class TestPrivacyOnLattice:
    @pytest.mark.parametrize(("n", "k"), [(2, 1), (3, 3), (4, 2)])
    @pytest.mark.parametrize("epsilon", [0.5, 1.0, 3.0])
    def test_passes_and_is_tight(self, n, k, epsilon):
        report = verify_privacy_on_lattice(n, k, PrivacyParams(epsilon))
        assert report.passed
        assert report.details["max_log_ratio"] == pytest.approx(epsilon, abs=1e-9)
        assert report.details["tight_pairs"] > 0

    def test_monotonic_neighbors(self):
        report = verify_privacy_on_lattice(3, 2, PrivacyParams(1.0, 1.0, monotonic_quality=True))
        assert report.passed
        assert report.details["monotonic_quality"] is True

    def test_counts_pairs(self, unit_params):
        # (0,0): top raise lands on (0,1); (0,1): low class only, top raise leaves depth 1
        assert verify_privacy_on_lattice(2, 1, unit_params).checked == 2


class TestRegularity:
    def test_pf_and_em(self, unit_params):
        report = verify_regularity(unit_params, trials=60, seed=3)
        assert report.passed
        assert report.details["symmetry_failures"] == 0
        assert report.details["shift_failures"] == 0
        assert report.checked == 120
        assert report.details["mechanisms"] == ["pf", "em"]

    def test_pf_only(self):
        report = verify_regularity(
            PrivacyParams(0.3, 2.0), trials=20, seed=5, mechanisms=(Mechanism.PF,), max_n=5
        )
        assert report.passed
        assert report.checked == 20

    def test_rejects_zero_trials(self, unit_params):
        with pytest.raises(InvalidArgumentError, match="trials"):
            verify_regularity(unit_params, trials=0, seed=0)


def test_g_monotonicity(unit_params):
    report = verify_g_monotonicity(unit_params, trials=100, seed=11)
    assert report.passed
    assert report.name == "g-monotonicity"


def test_oracles_agree():
    report = verify_oracles(trials=60, seed=2, max_n=7)
    assert report.passed
    assert sum(report.details["dp_methods"].values()) == 60


def test_dominance_suite():
    report = verify_dominance_suite(trials=100, seed=4)
    assert report.passed
    assert report.details["failures"] == 0
    assert report.details["largest_ratio"] >= 1.0


def test_recurrence_suite(unit_params):
    report = verify_recurrence_suite(trials=25, seed=6, n=4, k=3, params=unit_params)
    assert report.passed
    assert report.name == "recurrence"
    assert report.checked >= 25


def test_combine_reports():
    combined = combine_reports(
        "all",
        [
            CheckReport("a", True, 0.0, checked=2),
            CheckReport("b", False, 0.5, checked=3),
        ],
    )
    assert combined.passed is False
    assert combined.max_violation == 0.5
    assert combined.checked == 5
    assert [check["name"] for check in combined.details["checks"]] == ["a", "b"]
