"""Randomized selection samplers.

Single draws (``sample_*``) follow the textbook procedures step by step and can
record a trace of the visited candidates and coin outcomes. :func:`draw_samples`
produces large batches with the same distributions using vectorized numpy
operations.

Randomness comes from numpy's PCG64 generator seeded through
``SeedSequence(seed)``. A single draw uses that generator directly. A batch is
cut into blocks of ``max(1, BLOCK_ELEMENTS // n)`` draws and block ``b`` uses
the ``b``-th child of ``SeedSequence(seed).spawn(...)``, so results depend only
on the seed, the inputs and the requested count.

Samplers are not hardened against floating-point side channels and must not be
used where cryptographically secure noise is required.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InvalidArgumentError, RejectionLimitError
from .scores import Mechanism, PrivacyParams, ScoresLike, as_scores, coin_array


logger = logging.getLogger(__name__)

DEFAULT_REJECTION_MAX_ITERATIONS = 10_000_000
BLOCK_ELEMENTS = 1 << 20

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class SamplerTrace:
    """Visited candidates in order and the coin outcome for each visit."""

    order: tuple[int, ...]
    coins: tuple[bool, ...]


@dataclass(frozen=True)
class SamplerResult:
    """Selected candidate (0-based) and an optional trace."""

    index: int
    trace: Optional[SamplerTrace] = None


def _checked_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        message = f"Seed must be a non-negative integer, got {seed!r}"
        raise InvalidArgumentError(message)
    return int(seed)


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return the generator used for a single draw with ``seed``."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(_checked_seed(seed)))


def laplace_from_uniform(u: np.ndarray, scale: float) -> np.ndarray:
    """Map uniforms on ``[0, 1)`` to Laplace(0, scale) by the inverse CDF."""
    centered = np.asarray(u, dtype=np.float64) - 0.5
    with np.errstate(divide="ignore"):
        return -scale * np.sign(centered) * np.log1p(-2.0 * np.abs(centered))


def _result(index: int, order: list[int], coins: list[bool], trace: bool) -> SamplerResult:
    if not trace:
        return SamplerResult(index=index)
    return SamplerResult(index=index, trace=SamplerTrace(tuple(order), tuple(coins)))


def sample_permute_and_flip(
    q: ScoresLike,
    params: PrivacyParams,
    seed: SeedLike,
    *,
    sequential: bool = False,
    trace: bool = False,
) -> SamplerResult:
    """Draw one candidate with permute-and-flip.

    Candidates are visited in uniformly random order and each flips a coin with
    heads probability ``p_r``; the first head is returned. Every maximal
    candidate has ``p_r = 1``, so the loop always terminates.

    Args:
        q: Quality scores.
        params: Privacy parameters.
        seed: Non-negative integer seed.
        sequential: Draw the next candidate uniformly without replacement
            instead of shuffling all candidates up front. Both orders have the
            same distribution.
        trace: Record visited candidates and coin outcomes.

    Returns:
        The selected candidate.
    """
    p = coin_array(q, params)
    rng = make_rng(seed)
    order: list[int] = []
    coins: list[bool] = []

    if sequential:
        remaining = list(range(p.size))
        while remaining:
            j = int(rng.integers(len(remaining)))
            remaining[j], remaining[-1] = remaining[-1], remaining[j]
            candidate = remaining.pop()
            heads = bool(rng.random() < p[candidate])
            order.append(candidate)
            coins.append(heads)
            if heads:
                return _result(candidate, order, coins, trace)
    else:
        for candidate in rng.permutation(p.size).tolist():
            heads = bool(rng.random() < p[candidate])
            order.append(candidate)
            coins.append(heads)
            if heads:
                return _result(candidate, order, coins, trace)

    # Unreachable: the maximal candidate always flips heads.
    message = "permute-and-flip exhausted all candidates without a head"
    raise AssertionError(message)


def sample_exponential(q: ScoresLike, params: PrivacyParams, seed: SeedLike) -> SamplerResult:
    """Draw one candidate from the softmax of the normalized scores."""
    p = coin_array(q, params)
    rng = make_rng(seed)
    return SamplerResult(index=int(_categorical(p, rng.random(1))[0]))


def sample_exponential_rejection(
    q: ScoresLike,
    params: PrivacyParams,
    seed: SeedLike,
    *,
    max_iterations: int = DEFAULT_REJECTION_MAX_ITERATIONS,
    trace: bool = False,
) -> SamplerResult:
    """Draw one exponential-mechanism candidate by rejection sampling.

    Candidates are proposed uniformly with replacement and accepted with
    probability ``p_r``.

    Raises:
        RejectionLimitError: No proposal was accepted within ``max_iterations``.
    """
    p = coin_array(q, params)
    rng = make_rng(seed)
    order: list[int] = []
    coins: list[bool] = []
    for _ in range(max_iterations):
        candidate = int(rng.integers(p.size))
        heads = bool(rng.random() < p[candidate])
        if trace:
            order.append(candidate)
            coins.append(heads)
        if heads:
            return _result(candidate, order, coins, trace)
    message = f"Rejection sampler did not accept within {max_iterations} proposals"
    raise RejectionLimitError(message, iterations=max_iterations)


def sample_report_noisy_max(
    q: ScoresLike, params: PrivacyParams, seed: SeedLike
) -> SamplerResult:
    """Add Laplace(2Δ/ε) noise to every score and return the argmax.

    Ties go to the lowest index.
    """
    scores = as_scores(q).as_array()
    rng = make_rng(seed)
    noise = laplace_from_uniform(rng.random(scores.size), params.noise_scale)
    noisy = scores - scores.max() + noise
    return SamplerResult(index=int(np.argmax(noisy)))


def _categorical(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cumulative = np.cumsum(weights)
    picks = np.searchsorted(cumulative, u * cumulative[-1], side="right")
    return np.minimum(picks, weights.size - 1)


def _pf_block(p: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    n = p.size
    orders = rng.permuted(np.tile(np.arange(n), (size, 1)), axis=1)
    heads = rng.random((size, n)) < p[orders]
    first = heads.argmax(axis=1)
    return orders[np.arange(size), first]


def _pf_sequential_block(p: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    n = p.size
    pool = np.tile(np.arange(n), (size, 1))
    picks = np.full(size, -1, dtype=np.int64)
    active = np.arange(size)
    for step in range(n):
        if active.size == 0:
            break
        swap = rng.integers(step, n, size=active.size)
        current = pool[active, swap]
        pool[active, swap] = pool[active, step]
        pool[active, step] = current
        heads = rng.random(active.size) < p[current]
        picks[active[heads]] = current[heads]
        active = active[~heads]
    return picks


def _rejection_block(
    p: np.ndarray, size: int, rng: np.random.Generator, max_iterations: int
) -> np.ndarray:
    picks = np.full(size, -1, dtype=np.int64)
    active = np.arange(size)
    rounds = 0
    while active.size:
        if rounds >= max_iterations:
            message = f"Rejection sampler did not accept within {max_iterations} proposals"
            raise RejectionLimitError(message, iterations=max_iterations)
        proposals = rng.integers(p.size, size=active.size)
        heads = rng.random(active.size) < p[proposals]
        picks[active[heads]] = proposals[heads]
        active = active[~heads]
        rounds += 1
    return picks


def draw_samples(
    q: ScoresLike,
    params: PrivacyParams,
    mechanism: Union[Mechanism, str],
    count: int,
    seed: int,
    *,
    sequential: bool = False,
    rejection: bool = False,
    max_iterations: int = DEFAULT_REJECTION_MAX_ITERATIONS,
) -> np.ndarray:
    """Draw ``count`` candidates (0-based) in vectorized blocks.

    Args:
        q: Quality scores.
        params: Privacy parameters.
        mechanism: ``pf``, ``em`` or ``rnm``.
        count: Number of draws.
        seed: Non-negative integer seed.
        sequential: For ``pf``, draw candidates lazily without replacement.
        rejection: For ``em``, use the rejection sampler.
        max_iterations: Proposal cap for the rejection sampler.

    Returns:
        Integer array of length ``count``.
    """
    mechanism = Mechanism.parse(mechanism)
    if count < 0:
        message = f"Sample count must be non-negative, got {count}"
        raise InvalidArgumentError(message)
    scores = as_scores(q)
    p = coin_array(scores, params)
    n = scores.n
    block_size = max(1, BLOCK_ELEMENTS // n)
    blocks = math.ceil(count / block_size) if count else 0
    children = np.random.SeedSequence(_checked_seed(seed)).spawn(blocks)
    shifted = scores.as_array() - scores.best

    out = np.empty(count, dtype=np.int64)
    for block, child in enumerate(children):
        rng = np.random.default_rng(child)
        start = block * block_size
        size = min(block_size, count - start)
        if mechanism is Mechanism.PF:
            picks = (
                _pf_sequential_block(p, size, rng) if sequential else _pf_block(p, size, rng)
            )
        elif mechanism is Mechanism.EM:
            picks = (
                _rejection_block(p, size, rng, max_iterations)
                if rejection
                else _categorical(p, rng.random(size))
            )
        else:
            noise = laplace_from_uniform(rng.random((size, n)), params.noise_scale)
            picks = np.argmax(shifted + noise, axis=1)
        out[start : start + size] = picks

    logger.debug(
        "Drew %d samples: mechanism=%s n=%d blocks=%d",
        count,
        mechanism.value,
        n,
        blocks,
    )
    return out


def empirical_pmf(indices: np.ndarray, n: int) -> np.ndarray:
    """Relative frequency of each candidate among ``indices``."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return np.zeros(n)
    return np.bincount(indices, minlength=n)[:n] / indices.size


def total_variation(first: np.ndarray, second: np.ndarray) -> float:
    """Total-variation distance between two pmfs of equal length."""
    first = np.asarray(first, dtype=np.float64)
    second = np.asarray(second, dtype=np.float64)
    if first.shape != second.shape:
        message = f"pmf lengths differ: {first.shape} vs {second.shape}"
        raise InvalidArgumentError(message)
    return 0.5 * float(np.abs(first - second).sum())
