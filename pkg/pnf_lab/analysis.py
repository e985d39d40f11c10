"""Error metrics, dominance checks and worst-case error curves.

The error of a selection is the gap ``q_* - q_r`` between the best score and
the score of the selected candidate. All quantities here are computed from
exact pmfs or closed forms, never from samples.

On the worst-case family ``q = (c, ..., c, 0)`` with coin probability ``p`` on
the low candidates, the expected errors are

* softmax: ``(1/rate) * log(1/p) * (n-1)p / (1 + (n-1)p)``
* permute-and-flip: ``(1/rate) * log(1/p) * (1 - (1 - (1-p)^n) / (np))``

where ``rate`` is the coin exponent multiplier (``ε/2Δ`` by default).
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import optimize, special

from .errors import InvalidArgumentError
from .exact_dist import (
    QuadratureConfig,
    SelectionDistribution,
    pf_acceptance_integrals,
    pmf_exponential,
    pmf_noisy_max,
    pmf_pf_dp,
)
from .scores import Mechanism, PrivacyParams, QualityScores, ScoresLike, as_scores


logger = logging.getLogger(__name__)

MAXIMIZE_GRID_SIZE = 1024
MAXIMIZE_GRID_LOW = 1e-12
MAXIMIZE_RELATIVE_TOLERANCE = 1e-10
DOMINANCE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ErrorProfile:
    """Expected error and the tail ``Pr[E >= t]`` at every distinct gap ``t``."""

    expected_error: float
    ccdf: tuple[tuple[float, float], ...]

    def to_dict(self) -> Dict[str, object]:
        return {
            "expected_error": self.expected_error,
            "ccdf": [{"t": t, "probability": prob} for t, prob in self.ccdf],
        }


@dataclass(frozen=True)
class DominanceReport:
    """Comparison of permute-and-flip against the exponential mechanism."""

    holds: bool
    max_violation: float
    pf_expected_error: float
    em_expected_error: float
    ratio: float
    ccdf: tuple[tuple[float, float, float], ...]

    def to_dict(self) -> Dict[str, object]:
        return {
            "holds": self.holds,
            "max_violation": self.max_violation,
            "pf_expected_error": self.pf_expected_error,
            "em_expected_error": self.em_expected_error,
            "ratio": self.ratio,
            "ccdf": [{"t": t, "pf": pf, "em": em} for t, pf, em in self.ccdf],
        }


@dataclass(frozen=True)
class WorstCaseCurve:
    mechanism: Mechanism
    n: int
    points: tuple[tuple[float, float], ...]
    maximizer: tuple[float, float]


@dataclass(frozen=True)
class UtilityBounds:
    expected_bound: float
    tail_threshold: float
    tail_bound: float


@dataclass(frozen=True)
class LowerBound:
    """Guaranteed worst-case error next to the exact value where it is attained."""

    n: int
    bound: float
    exact: float
    upper_bound: float
    holds: bool

    @property
    def ratio_to_upper(self) -> float:
        return self.exact / self.upper_bound if self.upper_bound else 1.0


@dataclass(frozen=True)
class WorstCaseByN:
    n: int
    em_worst: float
    pf_worst: float
    lower_bound: float
    upper_bound: float


@dataclass(frozen=True)
class NoisyMaxComparison:
    c: float
    em_error: float
    pf_error: float
    rnm_error: float


def _check_lengths(dist: SelectionDistribution, scores: QualityScores) -> None:
    if len(dist) != scores.n:
        message = f"Distribution has {len(dist)} entries but there are {scores.n} scores"
        raise InvalidArgumentError(message)


def expected_error(dist: SelectionDistribution, q: ScoresLike) -> float:
    """Return ``sum_r probs_r * (q_* - q_r)``."""
    scores = as_scores(q)
    _check_lengths(dist, scores)
    return max(float(dist.as_array() @ scores.gaps()), 0.0)


def error_ccdf(dist: SelectionDistribution, q: ScoresLike, t: float) -> float:
    """Return ``Pr[E >= t]``; gaps equal to ``t`` are included."""
    if t < 0:
        message = f"Threshold must be non-negative, got {t}"
        raise InvalidArgumentError(message)
    scores = as_scores(q)
    _check_lengths(dist, scores)
    if t == 0:
        return 1.0
    probs = dist.as_array()
    return float(probs[scores.gaps() >= t].sum())


def error_profile(dist: SelectionDistribution, q: ScoresLike) -> ErrorProfile:
    scores = as_scores(q)
    thresholds = np.unique(scores.gaps())
    ccdf = tuple((float(t), error_ccdf(dist, scores, float(t))) for t in thresholds)
    return ErrorProfile(expected_error(dist, scores), ccdf)


def error_ratio(numerator: float, denominator: float) -> float:
    """Ratio of two expected errors, 1 when both are zero."""
    if denominator == 0.0:
        return 1.0 if numerator == 0.0 else math.inf
    return numerator / denominator


def log_expected_error(
    mechanism: Union[Mechanism, str], q: ScoresLike, params: PrivacyParams
) -> float:
    """Natural log of the expected error, finite where the error itself underflows.

    Works from log coins ``-rate * gap`` so well-separated scores keep their
    relative errors. Defined for permute-and-flip and softmax; ``-inf`` when
    every candidate is maximal.
    """
    mechanism = Mechanism.parse(mechanism)
    gaps = as_scores(q).gaps()
    losers = gaps > 0
    if not losers.any():
        return -math.inf
    log_coins = -params.coin_rate * gaps
    if mechanism is Mechanism.EM:
        log_mass = log_coins - special.logsumexp(log_coins)
    elif mechanism is Mechanism.PF:
        log_mass = log_coins + np.log(pf_acceptance_integrals(np.exp(log_coins)))
    else:
        message = f"Log-space error is not available for {mechanism.value}"
        raise InvalidArgumentError(message)
    return float(special.logsumexp(log_mass[losers] + np.log(gaps[losers])))


def check_dominance(
    q: ScoresLike, params: PrivacyParams, tolerance: float = DOMINANCE_TOLERANCE
) -> DominanceReport:
    """Check that permute-and-flip's error tail never exceeds the softmax's."""
    scores = as_scores(q)
    pf = pmf_pf_dp(scores, params)
    em = pmf_exponential(scores, params)
    thresholds = np.unique(scores.gaps())
    rows = tuple(
        (float(t), error_ccdf(pf, scores, float(t)), error_ccdf(em, scores, float(t)))
        for t in thresholds
    )
    pf_error = expected_error(pf, scores)
    em_error = expected_error(em, scores)
    violation = max(
        max(pf_tail - em_tail for _, pf_tail, em_tail in rows),
        pf_error - em_error,
        0.0,
    )
    return DominanceReport(
        holds=violation <= tolerance,
        max_violation=violation,
        pf_expected_error=pf_error,
        em_expected_error=em_error,
        ratio=error_ratio(em_error, pf_error),
        ccdf=rows,
    )


def _check_p(p: float) -> None:
    if not (0.0 < p <= 1.0):
        message = f"Coin probability must lie in (0, 1], got {p}"
        raise InvalidArgumentError(message)


def _check_n(n: int, minimum: int = 1) -> None:
    if isinstance(n, bool) or int(n) != n or n < minimum:
        message = f"Number of candidates must be an integer >= {minimum}, got {n}"
        raise InvalidArgumentError(message)


def _pf_low_mass(p: float, n: int) -> float:
    """``1 - (1 - (1-p)^n) / (np)`` without cancellation for small ``np``."""
    if n * p >= 0.1:
        return 1.0 - (-math.expm1(n * math.log1p(-p))) / (n * p)
    total = 0.0
    term = 1.0
    for k in range(1, n + 1):
        term *= -p * (n - k + 1) / k
        if k >= 2:
            total += term
            if abs(term) <= 1e-18 * abs(total):
                break
    return total / (n * p)


def worst_case_scores(p: float, n: int, params: PrivacyParams) -> QualityScores:
    """The instance ``(c, ..., c, 0)`` whose low candidates have coin ``p``."""
    _check_p(p)
    _check_n(n)
    c = math.log(p) / params.coin_rate
    return QualityScores(tuple([c] * (n - 1) + [0.0]))


def worst_case_value(
    mechanism: Union[Mechanism, str],
    p: float,
    n: int,
    params: PrivacyParams,
    quadrature: Optional[QuadratureConfig] = None,
) -> float:
    """Expected error on ``(c, ..., c, 0)`` with ``c = log(p) / rate``."""
    mechanism = Mechanism.parse(mechanism)
    _check_p(p)
    _check_n(n)
    if p == 1.0 or n == 1:
        return 0.0
    scale = math.log(1.0 / p) / params.coin_rate
    if mechanism is Mechanism.EM:
        spread = (n - 1) * p
        return scale * spread / (1.0 + spread)
    if mechanism is Mechanism.PF:
        return scale * _pf_low_mass(p, n)
    return noisy_max_expected_error(-scale, n, params, quadrature)


def worst_case_maximize(
    mechanism: Union[Mechanism, str],
    n: int,
    params: PrivacyParams,
    grid_size: int = MAXIMIZE_GRID_SIZE,
) -> tuple[float, float]:
    """Largest worst-case expected error over ``p`` and where it occurs.

    A log-spaced grid on ``[1e-12, 1]`` locates the best cell, which golden
    section search then refines.
    """
    mechanism = Mechanism.parse(mechanism)
    _check_n(n, minimum=2)

    def value(p: float) -> float:
        return worst_case_value(mechanism, min(max(p, MAXIMIZE_GRID_LOW), 1.0), n, params)

    grid = np.logspace(math.log10(MAXIMIZE_GRID_LOW), 0.0, grid_size)
    values = np.array([value(float(p)) for p in grid])
    best = int(np.argmax(values))
    best_p, best_value = float(grid[best]), float(values[best])
    if 0 < best < grid_size - 1:
        bracket = (float(grid[best - 1]), best_p, float(grid[best + 1]))
        try:
            result = optimize.minimize_scalar(
                lambda p: -value(p),
                bracket=bracket,
                method="golden",
                tol=MAXIMIZE_RELATIVE_TOLERANCE,
            )
        except (ValueError, RuntimeError) as exc:
            logger.debug("Golden-section refinement skipped: %s", exc)
        else:
            refined = float(result.x)
            if 0.0 < refined <= 1.0 and value(refined) >= best_value:
                best_p, best_value = refined, value(refined)
    return best_p, best_value


def worst_case_curve(
    mechanism: Union[Mechanism, str],
    n: int,
    params: PrivacyParams,
    grid: Sequence[float],
    quadrature: Optional[QuadratureConfig] = None,
) -> WorstCaseCurve:
    mechanism = Mechanism.parse(mechanism)
    points = tuple(
        (float(p), worst_case_value(mechanism, float(p), n, params, quadrature)) for p in grid
    )
    return WorstCaseCurve(mechanism, n, points, worst_case_maximize(mechanism, n, params))


def utility_bounds(n: int, params: PrivacyParams, t: float) -> UtilityBounds:
    """Analytic bounds shared by the softmax and permute-and-flip.

    The expected error is at most ``log(n) / rate`` and
    ``Pr[E >= (log(n) + t) / rate] <= exp(-t)``.
    """
    _check_n(n)
    if t < 0:
        message = f"Tail parameter must be non-negative, got {t}"
        raise InvalidArgumentError(message)
    scale = 1.0 / params.coin_rate
    return UtilityBounds(
        expected_bound=scale * math.log(n),
        tail_threshold=scale * (math.log(n) + t),
        tail_bound=math.exp(-t),
    )


def lower_bound(n: int, params: PrivacyParams) -> LowerBound:
    """Worst-case error every permute-and-flip run must be able to reach.

    At ``c = -log(n) / rate`` the exact error is
    ``log(n) / rate * (1 - 1/n)^n``, which is never below a quarter of the
    ``log(n) / rate`` upper bound.
    """
    _check_n(n, minimum=2)
    scale = 1.0 / params.coin_rate
    upper = scale * math.log(n)
    bound = upper / 4.0
    exact = upper * (1.0 - 1.0 / n) ** n
    holds = exact >= bound * (1.0 - DOMINANCE_TOLERANCE)
    if not holds:
        logger.error("Lower bound violated: n=%d exact=%.12g bound=%.12g", n, exact, bound)
    return LowerBound(n=n, bound=bound, exact=exact, upper_bound=upper, holds=holds)


def worst_case_by_n(ns: Sequence[int], params: PrivacyParams) -> List[WorstCaseByN]:
    """Worst-case errors of both mechanisms against the number of candidates."""
    rows = []
    for n in ns:
        bounds = lower_bound(n, params)
        rows.append(
            WorstCaseByN(
                n=n,
                em_worst=worst_case_maximize(Mechanism.EM, n, params)[1],
                pf_worst=worst_case_maximize(Mechanism.PF, n, params)[1],
                lower_bound=bounds.bound,
                upper_bound=bounds.upper_bound,
            )
        )
    return rows


def noisy_max_expected_error(
    c: float,
    n: int,
    params: PrivacyParams,
    quadrature: Optional[QuadratureConfig] = None,
) -> float:
    """Report-noisy-max error on ``(c, ..., c, 0)``: ``-c * (1 - Pr[last])``."""
    if c > 0:
        message = f"Score offset must be <= 0, got {c}"
        raise InvalidArgumentError(message)
    _check_n(n)
    if c == 0 or n == 1:
        return 0.0
    dist = pmf_noisy_max([c] * (n - 1) + [0.0], params, quadrature)
    return -c * (1.0 - dist.probs[-1])


def noisy_max_comparison(
    cs: Sequence[float],
    n: int,
    params: PrivacyParams,
    quadrature: Optional[QuadratureConfig] = None,
) -> List[NoisyMaxComparison]:
    """Expected errors of all three mechanisms on ``(c, ..., c, 0)``."""
    rows = []
    for c in cs:
        scores = [float(c)] * (n - 1) + [0.0]
        rows.append(
            NoisyMaxComparison(
                c=float(c),
                em_error=expected_error(pmf_exponential(scores, params), scores),
                pf_error=expected_error(pmf_pf_dp(scores, params), scores),
                rnm_error=noisy_max_expected_error(float(c), n, params, quadrature),
            )
        )
    return rows
