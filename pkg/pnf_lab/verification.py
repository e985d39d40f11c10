"""Executable checks of the privacy and regularity properties.

Each check returns a :class:`~pnf_lab.reports.CheckReport`; the CLI turns a
failed report into exit code 1. Randomized suites draw their instances from
``numpy.random.default_rng(seed)`` so a failing case can be replayed.
"""

import logging
import math
from typing import Callable, Dict, List, Sequence

import numpy as np

from .analysis import DOMINANCE_TOLERANCE, check_dominance
from .errors import InvalidArgumentError
from .exact_dist import (
    SelectionDistribution,
    exact_pmf,
    pmf_pf_dp,
    pmf_pf_inclusion_exclusion,
    pmf_pf_permutation,
    verify_recurrence,
)
from .lattice import DEFAULT_LATTICE_CAP, enumerate_lattice
from .reports import CheckReport, combine_reports
from .scores import Mechanism, PrivacyParams, coin_array


logger = logging.getLogger(__name__)

PRIVACY_SLACK = 1e-9
TIGHTNESS_TOLERANCE = 1e-10
ORACLE_TOLERANCE = 1e-10
MONOTONICITY_TOLERANCE = 1e-12
ORACLE_EPSILONS = (0.1, 1.0, 5.0)

# Scores on a 1/8 grid keep q + c exact in double precision.
_GRID = 8.0


def _check_trials(trials: int) -> None:
    if trials < 1:
        message = f"Number of trials must be at least 1, got {trials}"
        raise InvalidArgumentError(message)


def verify_privacy_on_lattice(
    n: int, k: int, params: PrivacyParams, cap: int = DEFAULT_LATTICE_CAP
) -> CheckReport:
    """Exhaustively check the permute-and-flip privacy inequality on the lattice.

    For every canonical vector ``q`` and every score class ``r`` the
    probability of ``r`` may grow by at most ``e^ε`` when ``q_r`` is raised by
    the neighbor step (``2Δ``, or ``Δ`` under monotonic quality). Raising a
    maximal entry is the same as lowering every other entry, so that case is
    only checked while the shifted vector stays within depth ``k``. Whenever
    ``q_r`` sits at least one step below the maximum the ratio must be exactly
    ``e^ε``.
    """
    vectors = enumerate_lattice(n, k, params.delta, cap)
    step = params.neighbor_step
    floor = -2.0 * params.delta * k
    max_log_ratio = -math.inf
    tightness_deviation = 0.0
    pairs = 0
    tight_pairs = 0

    for vector in vectors:
        q = np.array(vector.entries)
        probs = pmf_pf_dp(q, params).as_array()
        for level, _count in vector.classes():
            r = vector.levels.index(level)
            raised = q.copy()
            raised[r] += step
            if q[r] == 0.0 and (raised - raised.max()).min() < floor:
                continue
            raised_prob = pmf_pf_dp(raised, params).as_array()[r]
            log_ratio = math.log(raised_prob) - math.log(probs[r])
            max_log_ratio = max(max_log_ratio, log_ratio)
            pairs += 1
            if q[r] <= -step:
                tight_pairs += 1
                tightness_deviation = max(tightness_deviation, abs(log_ratio - params.epsilon))

    excess = max(max_log_ratio - params.epsilon, 0.0)
    passed = excess <= PRIVACY_SLACK and tightness_deviation <= TIGHTNESS_TOLERANCE
    logger.debug(
        "Lattice privacy check: n=%d k=%d vectors=%d pairs=%d max_log_ratio=%.12g",
        n,
        k,
        len(vectors),
        pairs,
        max_log_ratio,
    )
    return CheckReport(
        name="privacy",
        passed=passed,
        max_violation=max(excess, tightness_deviation),
        checked=pairs,
        details={
            "n": n,
            "k": k,
            "epsilon": params.epsilon,
            "monotonic_quality": params.monotonic_quality,
            "max_log_ratio": max_log_ratio,
            "tight_pairs": tight_pairs,
            "tightness_max_deviation": tightness_deviation,
        },
    )


def _random_grid_scores(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(-8 * int(_GRID), 1, size=n) / _GRID


def verify_regularity(
    params: PrivacyParams,
    trials: int,
    seed: int,
    mechanisms: Sequence[Mechanism] = (Mechanism.PF, Mechanism.EM),
    max_n: int = 8,
) -> CheckReport:
    """Check symmetry, shift invariance and monotonicity on random instances.

    Symmetry and shift invariance must hold bit for bit; raising one score
    while lowering the others may not reduce its probability by more than
    ``1e-12``.
    """
    _check_trials(trials)
    rng = np.random.default_rng(seed)
    symmetry_failures = 0
    shift_failures = 0
    monotonicity_violation = 0.0

    for _ in range(trials):
        n = int(rng.integers(1, max_n + 1))
        q = _random_grid_scores(rng, n)
        order = rng.permutation(n)
        shift = float(rng.integers(-50, 51))
        r = int(rng.integers(n))
        raised = q - rng.integers(0, 17, size=n) / _GRID
        raised[r] = q[r] + rng.integers(0, 17) / _GRID

        for mechanism in mechanisms:
            base = exact_pmf(mechanism, q, params).as_array()
            permuted = exact_pmf(mechanism, q[order], params).as_array()
            if not np.array_equal(permuted, base[order]):
                symmetry_failures += 1
            shifted = exact_pmf(mechanism, q + shift, params).as_array()
            if not np.array_equal(shifted, base):
                shift_failures += 1
            moved = exact_pmf(mechanism, raised, params).as_array()
            monotonicity_violation = max(monotonicity_violation, base[r] - moved[r])

    passed = (
        symmetry_failures == 0
        and shift_failures == 0
        and monotonicity_violation <= MONOTONICITY_TOLERANCE
    )
    return CheckReport(
        name="regularity",
        passed=passed,
        max_violation=max(monotonicity_violation, 0.0),
        checked=trials * len(mechanisms),
        details={
            "symmetry_failures": symmetry_failures,
            "shift_failures": shift_failures,
            "monotonicity_max_violation": max(monotonicity_violation, 0.0),
            "mechanisms": [Mechanism.parse(m).value for m in mechanisms],
        },
    )


def verify_g_monotonicity(
    params: PrivacyParams, trials: int, seed: int, max_n: int = 8
) -> CheckReport:
    """Check that ``g_r = Pr[r] / p_r`` is ordered like the scores."""
    _check_trials(trials)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, max_n + 1))
        q = rng.normal(0.0, 3.0, size=n)
        p = coin_array(q, params)
        keep = p > 0
        g = pmf_pf_dp(q, params).as_array()[keep] / p[keep]
        ordered = g[np.argsort(q[keep], kind="stable")]
        worst = max(worst, float(np.max(ordered[:-1] - ordered[1:], initial=0.0)))
    return CheckReport(
        name="g-monotonicity",
        passed=worst <= MONOTONICITY_TOLERANCE,
        max_violation=worst,
        checked=trials,
    )


def verify_oracles(
    trials: int,
    seed: int,
    max_n: int = 9,
    epsilons: Sequence[float] = ORACLE_EPSILONS,
    tolerance: float = ORACLE_TOLERANCE,
) -> CheckReport:
    """Compare the table recurrence with both enumeration oracles."""
    _check_trials(trials)
    rng = np.random.default_rng(seed)
    worst = 0.0
    methods: Dict[str, int] = {}
    oracles: List[Callable[..., SelectionDistribution]] = [
        pmf_pf_permutation,
        pmf_pf_inclusion_exclusion,
    ]
    for _ in range(trials):
        n = int(rng.integers(1, max_n + 1))
        params = PrivacyParams(float(rng.choice(epsilons)))
        q = rng.normal(0.0, 3.0, size=n)
        dp = pmf_pf_dp(q, params)
        methods[dp.method] = methods.get(dp.method, 0) + 1
        reference = dp.as_array()
        for oracle in oracles:
            worst = max(worst, float(np.abs(oracle(q, params).as_array() - reference).max()))
    return CheckReport(
        name="oracles",
        passed=worst <= tolerance,
        max_violation=worst,
        checked=trials,
        details={"dp_methods": methods},
    )


def verify_dominance_suite(
    trials: int,
    seed: int,
    max_n: int = 8,
    epsilons: Sequence[float] = ORACLE_EPSILONS,
    delta: float = 1.0,
) -> CheckReport:
    """Run the dominance check on random instances."""
    _check_trials(trials)
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = 0
    largest_ratio = 1.0
    for _ in range(trials):
        n = int(rng.integers(1, max_n + 1))
        params = PrivacyParams(float(rng.choice(epsilons)), delta)
        report = check_dominance(rng.normal(0.0, 3.0, size=n), params)
        worst = max(worst, report.max_violation)
        failures += 0 if report.holds else 1
        largest_ratio = max(largest_ratio, report.ratio)
    return CheckReport(
        name="dominance",
        passed=failures == 0 and worst <= DOMINANCE_TOLERANCE,
        max_violation=worst,
        checked=trials,
        details={"failures": failures, "largest_ratio": largest_ratio},
    )


def verify_recurrence_suite(
    trials: int, seed: int, n: int, k: int, params: PrivacyParams
) -> CheckReport:
    """Check the defining recurrence on random lattice vectors."""
    _check_trials(trials)
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(trials):
        levels = rng.integers(0, k + 1, size=n)
        levels[rng.integers(n)] = 0
        reports.append(verify_recurrence(-2.0 * params.delta * levels, params))
    combined = combine_reports("recurrence", reports)
    return CheckReport(
        name=combined.name,
        passed=combined.passed,
        max_violation=combined.max_violation,
        checked=combined.checked,
    )
