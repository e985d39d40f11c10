"""Exact selection probabilities for permute-and-flip, softmax and noisy max.

Three independent routes lead to the permute-and-flip pmf:

* enumeration of every visiting order (``n <= 10``),
* the alternating subset sum ``p_r * sum_{S not containing r} (-1)^|S| / (|S|+1) * prod p_s``
  (``n <= 20``),
* an O(n^2) table recurrence over elementary symmetric sums.

The table recurrence evaluates the coefficients of the polynomial
``prod_{s != r} (1 - p_s t)`` and sums them against ``1/(k+1)``, which is its
integral over ``[0, 1]``. The alternating sum loses precision once
``prod (1 + p_s)`` is large, so past that point the same integral is taken with
Gauss-Legendre nodes, which is exact for a polynomial of that degree and only
ever adds positive terms.

All pmfs are computed on candidates sorted by coin probability and scattered
back, so permuting the input permutes the output bit for bit.
"""

import functools
import itertools
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Union

import numpy as np
from scipy import integrate, special

from .errors import QuadratureAccuracyError, SizeLimitError
from .reports import CheckReport
from .scores import Mechanism, PrivacyParams, ScoresLike, as_scores, coin_array


logger = logging.getLogger(__name__)

PERMUTATION_CAP = 10
SUBSET_CAP = 20
NOISY_MAX_CAP = 1000

# Forward error bound of the table recurrence above which the integral form is used.
DP_ERROR_BUDGET = 1e-11
_PERMUTATION_CHUNK_ROWS = 1 << 15
_INTEGRAL_CHUNK_ROWS = 512


@dataclass(frozen=True)
class SelectionDistribution:
    """A pmf over candidate indices and the algorithm that produced it."""

    probs: tuple[float, ...]
    method: str
    normalization_defect: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(self.probs, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.probs)

    def to_dict(self) -> Dict[str, object]:
        payload: Dict[str, object] = {"probs": list(self.probs), "method": self.method}
        if self.normalization_defect:
            payload["normalization_defect"] = self.normalization_defect
        return payload


@dataclass(frozen=True)
class DpTables:
    """Tables of the permute-and-flip recurrence.

    ``S[k, r]`` (``0 <= k, r <= n``) is the k-th elementary symmetric sum of the
    first ``r`` coin probabilities. ``T[k, r]`` (``0 <= k < n``, candidate
    ``r`` 0-based) is the k-th elementary symmetric sum of all coins except
    candidate ``r``.
    """

    S: np.ndarray
    T: np.ndarray


@dataclass(frozen=True)
class QuadratureConfig:
    """Settings for the noisy-max integrals."""

    abs_tolerance: float = 1e-9
    tail_mass: float = 1e-12
    limit: int = 200


def _distribution(probs: np.ndarray, method: str, defect: float = 0.0) -> SelectionDistribution:
    return SelectionDistribution(tuple(probs.tolist()), method, defect)


def _sorted_apply(p: np.ndarray, compute: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    order = np.argsort(-p, kind="stable")
    out = np.empty_like(p)
    out[order] = compute(p[order])
    return out


def _check_size(n: int, cap: int, what: str) -> None:
    if n > cap:
        message = f"{what} supports at most {cap} candidates, got {n}"
        raise SizeLimitError(message, size=n, cap=cap, hint="Use pmf_pf_dp for larger inputs")


def pmf_exponential(q: ScoresLike, params: PrivacyParams) -> SelectionDistribution:
    """Softmax of the normalized scores, ``p_r / sum_s p_s``."""
    p = coin_array(q, params)
    return _distribution(_sorted_apply(p, lambda v: v / v.sum()), "em")


@functools.lru_cache(maxsize=PERMUTATION_CAP + 1)
def _permutation_table(n: int) -> np.ndarray:
    flat = itertools.chain.from_iterable(itertools.permutations(range(n)))
    return np.fromiter(flat, dtype=np.int8, count=math.factorial(n) * n).reshape(-1, n)


def _pf_by_permutations(p: np.ndarray) -> np.ndarray:
    n = p.size
    table = _permutation_table(n)
    totals = np.zeros(n)
    for start in range(0, table.shape[0], _PERMUTATION_CHUNK_ROWS):
        orders = table[start : start + _PERMUTATION_CHUNK_ROWS]
        coins = p[orders]
        survive = np.ones_like(coins)
        survive[:, 1:] = np.cumprod(1.0 - coins[:, :-1], axis=1)
        totals += np.bincount(orders.ravel(), weights=(coins * survive).ravel(), minlength=n)
    return totals / math.factorial(n)


def pmf_pf_permutation(q: ScoresLike, params: PrivacyParams) -> SelectionDistribution:
    """Permute-and-flip pmf by enumerating all ``n!`` visiting orders.

    Raises:
        SizeLimitError: ``n > 10``.
    """
    scores = as_scores(q)
    _check_size(scores.n, PERMUTATION_CAP, "Permutation enumeration")
    p = coin_array(scores, params)
    return _distribution(_sorted_apply(p, _pf_by_permutations), "pf-permutation")


def _pf_by_subsets(p: np.ndarray) -> np.ndarray:
    n = p.size
    products = np.ones(1)
    sizes = np.zeros(1, dtype=np.int64)
    for value in p:
        products = np.concatenate([products, products * value])
        sizes = np.concatenate([sizes, sizes + 1])
    terms = np.where(sizes % 2 == 0, 1.0, -1.0) / (sizes + 1) * products
    members = np.arange(products.size)
    g = np.array([terms[((members >> r) & 1) == 0].sum() for r in range(n)])
    return p * g


def pmf_pf_inclusion_exclusion(q: ScoresLike, params: PrivacyParams) -> SelectionDistribution:
    """Permute-and-flip pmf from the alternating sum over subsets.

    Raises:
        SizeLimitError: ``n > 20``.
    """
    scores = as_scores(q)
    _check_size(scores.n, SUBSET_CAP, "Subset enumeration")
    p = coin_array(scores, params)
    return _distribution(_sorted_apply(p, _pf_by_subsets), "pf-inclusion-exclusion")


def _elementary_sums(p: np.ndarray) -> np.ndarray:
    e = np.zeros(p.size + 1)
    e[0] = 1.0
    for value in p:
        e[1:] = e[1:] + value * e[:-1]
    return e


def dp_tables(q: ScoresLike, params: PrivacyParams) -> DpTables:
    """Build the full ``S`` and ``T`` tables (quadratic memory; for inspection)."""
    p = coin_array(q, params)
    n = p.size
    s_table = np.zeros((n + 1, n + 1))
    s_table[0, :] = 1.0
    for r in range(1, n + 1):
        s_table[1:, r] = s_table[1:, r - 1] + p[r - 1] * s_table[:-1, r - 1]
    t_table = np.zeros((n, n))
    t_table[0, :] = 1.0
    for k in range(1, n):
        t_table[k, :] = s_table[k, n] - p * t_table[k - 1, :]
    return DpTables(S=s_table, T=t_table)


def _pf_by_tables(p: np.ndarray) -> np.ndarray:
    e = _elementary_sums(p)
    t_row = np.ones_like(p)
    g = t_row.copy()
    for k in range(1, p.size):
        t_row = e[k] - p * t_row
        g += (-1.0) ** k / (k + 1) * t_row
    return p * g


@functools.lru_cache(maxsize=64)
def _unit_interval_nodes(count: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = special.roots_legendre(count)
    return (nodes + 1.0) / 2.0, weights / 2.0


def pf_acceptance_integrals(p: np.ndarray) -> np.ndarray:
    """``int_0^1 prod_{j != r} (1 - p_j t) dt`` for every ``r``.

    Permute-and-flip picks ``r`` with probability ``p_r`` times this
    integral. The integrand is a polynomial of degree ``n - 1``, so
    ``ceil(n/2)`` Gauss-Legendre nodes integrate it exactly, and every value
    lies in ``[1/n, 1]`` whatever the size of the coins.
    """
    p = np.asarray(p, dtype=np.float64)
    nodes, weights = _unit_interval_nodes(max(1, math.ceil(p.size / 2)))
    chunks = range(0, p.size, _INTEGRAL_CHUNK_ROWS)
    log_totals = np.zeros_like(nodes)
    for start in chunks:
        block = p[start : start + _INTEGRAL_CHUNK_ROWS]
        log_totals += np.log1p(-np.outer(block, nodes)).sum(axis=0)
    g = np.empty_like(p)
    for start in chunks:
        stop = min(start + _INTEGRAL_CHUNK_ROWS, p.size)
        log_factors = np.log1p(-np.outer(p[start:stop], nodes))
        g[start:stop] = np.exp(log_totals - log_factors) @ weights
    return g


def _pf_by_integral(p: np.ndarray) -> np.ndarray:
    return p * pf_acceptance_integrals(p)


def _table_error_bound(p: np.ndarray) -> float:
    log_growth = float(np.log1p(p).sum())
    n = p.size
    return n * (1.0 + math.log(n)) * np.finfo(np.float64).eps * math.exp(min(log_growth, 700.0))


def pmf_pf_dp(q: ScoresLike, params: PrivacyParams) -> SelectionDistribution:
    """Permute-and-flip pmf in O(n^2) time and O(n) memory.

    Uses ``T(k, r) = S(k, n) - p_r T(k-1, r)`` and
    ``Pr[r] = p_r * sum_k (-1)^k / (k+1) * T(k, r)``. When the forward error
    bound of that alternating sum exceeds :data:`DP_ERROR_BUDGET`, the same
    quantity is evaluated as an integral and the method tag says so.
    """
    p = coin_array(q, params)
    bound = _table_error_bound(p)
    if bound <= DP_ERROR_BUDGET:
        return _distribution(_sorted_apply(p, _pf_by_tables), "pf-dp")
    logger.debug(
        "pf-dp alternating sum too ill-conditioned; using product integral: n=%d bound=%.3g",
        p.size,
        bound,
    )
    return _distribution(_sorted_apply(p, _pf_by_integral), "pf-dp-product-integral")


def _laplace_pdf(x: float, scale: float) -> float:
    return math.exp(-abs(x) / scale) / (2.0 * scale)


def _laplace_cdf(x: np.ndarray, scale: float) -> np.ndarray:
    below = 0.5 * np.exp(np.minimum(x, 0.0) / scale)
    above = 1.0 - 0.5 * np.exp(-np.maximum(x, 0.0) / scale)
    return np.where(x < 0.0, below, above)


def _noisy_max_win_probability(
    shifts: np.ndarray, scale: float, config: QuadratureConfig
) -> float:
    """Probability that a candidate beats rivals whose scores trail it by ``shifts``."""
    if shifts.size == 0:
        return 1.0
    half_width = scale * math.log(1.0 / config.tail_mass)
    kinks = np.unique(np.concatenate([[0.0], -shifts]))
    kinks = kinks[(kinks > -half_width) & (kinks < half_width)]

    def integrand(x: float) -> float:
        return _laplace_pdf(x, scale) * float(np.prod(_laplace_cdf(shifts + x, scale)))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        estimate, abserr = integrate.quad(
            integrand,
            -half_width,
            half_width,
            points=kinks.tolist() or None,
            epsabs=config.abs_tolerance / 10.0,
            epsrel=0.0,
            limit=max(config.limit, 2 * kinks.size + 50),
        )
    achieved = abserr + config.tail_mass
    if achieved > config.abs_tolerance:
        message = (
            f"Noisy-max quadrature reached {achieved:.3g}, "
            f"above the tolerance {config.abs_tolerance:.3g}"
        )
        raise QuadratureAccuracyError(
            message, estimate=estimate, abserr=achieved, tolerance=config.abs_tolerance
        )
    return max(estimate, 0.0)


def pmf_noisy_max(
    q: ScoresLike, params: PrivacyParams, quadrature: Optional[QuadratureConfig] = None
) -> SelectionDistribution:
    """Report-noisy-max pmf by numerical integration.

    ``Pr[r] = integral f(x) prod_{s != r} F(q_r - q_s + x) dx`` with Laplace
    pdf ``f`` and cdf ``F`` at scale ``2Δ/ε``. Candidates with equal scores
    share one integral. The result is renormalized and the pre-normalization
    defect ``1 - sum`` is kept on the distribution.

    Raises:
        SizeLimitError: ``n > 1000``.
        QuadratureAccuracyError: An integral missed the absolute tolerance.
    """
    config = quadrature or QuadratureConfig()
    scores = as_scores(q)
    _check_size(scores.n, NOISY_MAX_CAP, "Noisy-max quadrature")
    values = scores.as_array() - scores.best
    scale = params.noise_scale

    by_value: Dict[float, float] = {}
    raw = np.empty(scores.n)
    for r, value in enumerate(values.tolist()):
        if value not in by_value:
            rivals = np.delete(values, r)
            by_value[value] = _noisy_max_win_probability(value - rivals, scale, config)
        raw[r] = by_value[value]

    total = float(raw.sum())
    defect = 1.0 - total
    logger.debug(
        "Noisy-max pmf: n=%d distinct=%d defect=%.3g", scores.n, len(by_value), defect
    )
    return _distribution(raw / total, "rnm-quadrature", defect)


def exact_pmf(
    mechanism: Union[Mechanism, str],
    q: ScoresLike,
    params: PrivacyParams,
    quadrature: Optional[QuadratureConfig] = None,
) -> SelectionDistribution:
    """Dispatch to the exact pmf of ``mechanism``."""
    mechanism = Mechanism.parse(mechanism)
    if mechanism is Mechanism.PF:
        return pmf_pf_dp(q, params)
    if mechanism is Mechanism.EM:
        return pmf_exponential(q, params)
    return pmf_noisy_max(q, params, quadrature)


def verify_recurrence(
    q: ScoresLike, params: PrivacyParams, tolerance: float = 1e-12
) -> CheckReport:
    """Check that the permute-and-flip pmf satisfies its defining recurrence.

    For a candidate below the maximum, ``Pr[r]`` equals ``p_r`` times its
    probability after raising it to the maximum. Maximal candidates share the
    mass left over by the others equally.
    """
    scores = as_scores(q)
    values = scores.as_array()
    best = values.max()
    probs = pmf_pf_dp(scores, params).as_array()
    p = coin_array(scores, params)

    lifted_violations: List[float] = []
    for r in np.flatnonzero(values < best):
        lifted = values.copy()
        lifted[r] = best
        lifted_prob = pmf_pf_dp(lifted, params).as_array()[r]
        lifted_violations.append(abs(probs[r] - p[r] * lifted_prob))

    maxima = values == best
    residual = (1.0 - probs[~maxima].sum()) / maxima.sum()
    shared_violations = np.abs(probs[maxima] - residual)

    lifted_max = max(lifted_violations, default=0.0)
    shared_max = float(shared_violations.max())
    max_violation = max(lifted_max, shared_max)
    return CheckReport(
        name="recurrence",
        passed=max_violation <= tolerance,
        max_violation=max_violation,
        checked=len(lifted_violations) + int(maxima.sum()),
        details={
            "below_max_violation": lifted_max,
            "maxima_violation": shared_max,
            "maxima_share": float(residual),
        },
    )

