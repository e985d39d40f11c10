"""Quality scores, privacy parameters and coin probabilities.

Everything in the package sees data only through a :class:`QualityScores`
vector. Scores are shifted so the best candidate sits at zero before any
probability is computed, which keeps every coin probability in ``(0, 1]``.
Coins for candidates far below the maximum may underflow to exactly zero;
such candidates are never selected.
"""

import enum
import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import InvalidArgumentError


class Mechanism(str, enum.Enum):
    """Selection mechanisms known to the toolkit."""

    PF = "pf"
    EM = "em"
    RNM = "rnm"

    @classmethod
    def parse(cls, value: Union[str, "Mechanism"]) -> "Mechanism":
        if isinstance(value, Mechanism):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError as exc:
            allowed = ", ".join(m.value for m in cls)
            message = f"Unknown mechanism '{value}'"
            raise InvalidArgumentError(message, hint=f"Use one of: {allowed}") from exc


@dataclass(frozen=True)
class QualityScores:
    """A non-empty vector of finite candidate scores."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if not values:
            message = "Quality scores must contain at least one candidate"
            raise InvalidArgumentError(message)
        for position, value in enumerate(values):
            if not math.isfinite(value):
                message = f"Quality score at position {position} is not finite: {value}"
                raise InvalidArgumentError(message)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def best(self) -> float:
        return max(self.values)

    @property
    def n_best(self) -> int:
        """Number of candidates attaining the maximum score."""
        best = self.best
        return sum(1 for v in self.values if v == best)

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)

    def gaps(self) -> np.ndarray:
        """Return ``q_* - q_r`` for every candidate."""
        arr = self.as_array()
        return arr.max() - arr

    def __len__(self) -> int:
        return len(self.values)


ScoresLike = Union[QualityScores, Sequence[float], np.ndarray]


def as_scores(q: ScoresLike) -> QualityScores:
    """Coerce a sequence or array into validated :class:`QualityScores`."""
    if isinstance(q, QualityScores):
        return q
    if isinstance(q, np.ndarray):
        if q.ndim != 1:
            message = f"Quality scores must be one-dimensional, got shape {q.shape}"
            raise InvalidArgumentError(message)
        return QualityScores(tuple(q.tolist()))
    return QualityScores(tuple(q))


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget, sensitivity bound and the monotonic-quality flag.

    With ``monotonic_quality`` set, the coin exponent uses ``epsilon / delta``
    instead of ``epsilon / (2 * delta)`` and neighboring score vectors differ
    by ``delta`` in one coordinate.
    """

    epsilon: float
    delta: float = 1.0
    monotonic_quality: bool = False

    def __post_init__(self) -> None:
        epsilon = float(self.epsilon)
        delta = float(self.delta)
        if not (math.isfinite(epsilon) and epsilon > 0):
            message = f"epsilon must be a finite positive number, got {self.epsilon}"
            raise InvalidArgumentError(message, hint="Pass e.g. --eps 1.0")
        if not (math.isfinite(delta) and delta > 0):
            message = f"delta must be a finite positive number, got {self.delta}"
            raise InvalidArgumentError(message, hint="Pass e.g. --delta 1.0")
        object.__setattr__(self, "epsilon", epsilon)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "monotonic_quality", bool(self.monotonic_quality))

    @property
    def coin_rate(self) -> float:
        """Multiplier applied to ``q_r - q_*`` inside the exponent."""
        if self.monotonic_quality:
            return self.epsilon / self.delta
        return self.epsilon / (2.0 * self.delta)

    @property
    def neighbor_step(self) -> float:
        """Worst-case single-coordinate change between neighboring score vectors."""
        return self.delta if self.monotonic_quality else 2.0 * self.delta

    @property
    def noise_scale(self) -> float:
        """Laplace scale used by report-noisy-max."""
        return 2.0 * self.delta / self.epsilon

    def with_epsilon(self, epsilon: float) -> "PrivacyParams":
        return PrivacyParams(epsilon, self.delta, self.monotonic_quality)


@dataclass(frozen=True)
class CoinProbabilities:
    """Per-candidate acceptance probabilities ``p_r``."""

    p: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.p, dtype=np.float64)


def normalize_scores(q: ScoresLike) -> QualityScores:
    """Shift ``q`` so its maximum entry is exactly zero."""
    scores = as_scores(q)
    arr = scores.as_array()
    return QualityScores(tuple((arr - arr.max()).tolist()))


def coin_array(q: ScoresLike, params: PrivacyParams) -> np.ndarray:
    """Array form of :func:`coin_probabilities` used by the numerical modules."""
    arr = as_scores(q).as_array()
    return np.exp(params.coin_rate * (arr - arr.max()))


def coin_probabilities(q: ScoresLike, params: PrivacyParams) -> CoinProbabilities:
    """Return ``p_r = exp(rate * (q_r - q_*))`` for every candidate."""
    return CoinProbabilities(tuple(coin_array(q, params).tolist()))


_SCORE_SEPARATORS = re.compile(r"[,\s]+")


def parse_scores(text: str) -> QualityScores:
    """Parse an inline comma-separated list or a one-column file body."""
    tokens = [token for token in _SCORE_SEPARATORS.split(text.strip()) if token]
    if not tokens:
        message = "No quality scores given"
        raise InvalidArgumentError(message, hint="Example: --scores=-2,0")
    values = []
    for token in tokens:
        try:
            values.append(float(token))
        except ValueError as exc:
            message = f"Invalid quality score '{token}'"
            raise InvalidArgumentError(message) from exc
    return QualityScores(tuple(values))