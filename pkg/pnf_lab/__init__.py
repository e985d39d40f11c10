"""Permute-and-flip private selection with exact analysis tools."""

from .analysis import (
    check_dominance,
    error_ccdf,
    error_profile,
    expected_error,
    lower_bound,
    noisy_max_comparison,
    utility_bounds,
    worst_case_by_n,
    worst_case_curve,
    worst_case_maximize,
    worst_case_value,
)
from .errors import PnfError
from .exact_dist import (
    SelectionDistribution,
    dp_tables,
    exact_pmf,
    pmf_exponential,
    pmf_noisy_max,
    pmf_pf_dp,
    pmf_pf_inclusion_exclusion,
    pmf_pf_permutation,
    verify_recurrence,
)
from .lattice import LatticeVector, enumerate_lattice
from .mechanisms import (
    draw_samples,
    sample_exponential,
    sample_exponential_rejection,
    sample_permute_and_flip,
    sample_report_noisy_max,
)
from .optimality import (
    build_lp,
    dual_feasibility_check,
    dual_solve,
    golden_ratio_threshold,
    optimality_ratio,
    pareto_probe,
    pf_lattice_objective,
    solve_lp,
)
from .scores import (
    Mechanism,
    PrivacyParams,
    QualityScores,
    coin_probabilities,
    normalize_scores,
    parse_scores,
)


__all__ = [
    "LatticeVector",
    "Mechanism",
    "PnfError",
    "PrivacyParams",
    "QualityScores",
    "SelectionDistribution",
    "build_lp",
    "check_dominance",
    "coin_probabilities",
    "dp_tables",
    "draw_samples",
    "dual_feasibility_check",
    "dual_solve",
    "enumerate_lattice",
    "error_ccdf",
    "error_profile",
    "exact_pmf",
    "expected_error",
    "golden_ratio_threshold",
    "lower_bound",
    "noisy_max_comparison",
    "normalize_scores",
    "optimality_ratio",
    "pareto_probe",
    "parse_scores",
    "pf_lattice_objective",
    "pmf_exponential",
    "pmf_noisy_max",
    "pmf_pf_dp",
    "pmf_pf_inclusion_exclusion",
    "pmf_pf_permutation",
    "sample_exponential",
    "sample_exponential_rejection",
    "sample_permute_and_flip",
    "sample_report_noisy_max",
    "solve_lp",
    "utility_bounds",
    "verify_recurrence",
    "worst_case_by_n",
    "worst_case_curve",
    "worst_case_maximize",
    "worst_case_value",
]
