"""Histogram selection tasks and ε-sweep experiments.

Two tasks turn a histogram into quality scores with sensitivity one:

* ``mode``: the score of a bin is its count.
* ``median``: the score of a bin is minus the number of records that would
  have to be added or removed before the bin could hold the median.

Experiment errors are computed exactly from pmfs, never from samples.
"""

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from scipy import optimize

from .analysis import error_ratio, expected_error, log_expected_error
from .errors import EpsilonRangeError, HistogramParseError, InvalidArgumentError
from .exact_dist import QuadratureConfig, exact_pmf
from .output import dump_json, write_csv
from .scores import Mechanism, PrivacyParams, QualityScores, ScoresLike, as_scores


logger = logging.getLogger(__name__)

TASKS = ("mode", "median")
TASK_SENSITIVITY = 1.0
HISTOGRAM_HEADER = ("bin", "count")
EXPERIMENT_HEADER = ("epsilon", "mechanism", "task", "expected_error", "ratio_vs_pf")
EPSILON_BRACKET = (1e-6, 100.0)
EPSILON_RELATIVE_TOLERANCE = 1e-6
DEFAULT_EPSILON_GRID = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)


@dataclass(frozen=True)
class Histogram:
    labels: Tuple[str, ...]
    counts: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.counts:
            message = "Histogram needs at least one bin"
            raise InvalidArgumentError(message)
        if len(self.labels) != len(self.counts):
            message = f"{len(self.labels)} labels for {len(self.counts)} counts"
            raise InvalidArgumentError(message)
        if len(set(self.labels)) != len(self.labels):
            message = "Histogram bin labels must be unique"
            raise InvalidArgumentError(message)
        if any(count < 0 for count in self.counts):
            message = "Histogram counts must be non-negative"
            raise InvalidArgumentError(message)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "Histogram":
        return cls(tuple(str(i + 1) for i in range(len(counts))), tuple(int(c) for c in counts))


@dataclass(frozen=True)
class ExperimentRow:
    epsilon: float
    mechanism: str
    task: str
    expected_error: float
    ratio_vs_pf: float

    def as_tuple(self) -> Tuple[float, str, str, float, float]:
        return (self.epsilon, self.mechanism, self.task, self.expected_error, self.ratio_vs_pf)

    def to_dict(self) -> Dict[str, object]:
        return dict(zip(EXPERIMENT_HEADER, self.as_tuple()))


def _parse_rows(stream: TextIO) -> Histogram:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        message = "Histogram file is empty"
        raise HistogramParseError(message, line=1) from None
    if tuple(cell.strip().lower() for cell in header) != HISTOGRAM_HEADER:
        message = f"Expected header 'bin,count', got {','.join(header)!r}"
        raise HistogramParseError(message, line=1)

    labels: List[str] = []
    counts: List[int] = []
    seen = set()
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            message = f"Expected 2 columns, got {len(row)}"
            raise HistogramParseError(message, line=line)
        label, raw_count = row[0].strip(), row[1].strip()
        try:
            count = int(raw_count)
        except ValueError:
            message = f"Count {raw_count!r} is not an integer"
            raise HistogramParseError(message, line=line) from None
        if count < 0:
            message = f"Count {count} is negative"
            raise HistogramParseError(message, line=line)
        if label in seen:
            message = f"Duplicate bin label {label!r}"
            raise HistogramParseError(message, line=line)
        seen.add(label)
        labels.append(label)
        counts.append(count)
    if not counts:
        message = "Histogram has a header but no bins"
        raise HistogramParseError(message, line=reader.line_num + 1)
    return Histogram(tuple(labels), tuple(counts))


def load_histogram(source: Union[str, Path, TextIO]) -> Histogram:
    """Read a ``bin,count`` CSV from a path or an open text stream."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as handle:
            histogram = _parse_rows(handle)
    else:
        histogram = _parse_rows(source)
    logger.debug("Loaded histogram: bins=%d total=%d", len(histogram), histogram.total)
    return histogram


def parse_histogram_text(text: str) -> Histogram:
    return _parse_rows(io.StringIO(text))


def mode_scores(h: Histogram) -> QualityScores:
    return QualityScores(tuple(float(c) for c in h.counts))


def median_scores(h: Histogram) -> QualityScores:
    """``-max(0, below - N//2, above - N//2)`` per bin."""
    counts = h.as_array()
    half = h.total // 2
    running = np.cumsum(counts)
    below = running - counts
    above = h.total - running
    excess = np.maximum.reduce([np.zeros_like(counts), below - half, above - half])
    return QualityScores(tuple(float(-e) if e else 0.0 for e in excess))


def task_scores(h: Histogram, task: str) -> QualityScores:
    if task == "mode":
        return mode_scores(h)
    if task == "median":
        return median_scores(h)
    message = f"Unknown task {task!r}; expected one of {', '.join(TASKS)}"
    raise InvalidArgumentError(message)


def synthetic_power_law_histogram(
    bins: int = 1024, scale: float = 1e6, exponent: float = 1.1
) -> Histogram:
    """Counts ``floor(scale / r^exponent)`` for ``r = 1..bins``."""
    if bins < 1:
        message = f"Number of bins must be at least 1, got {bins}"
        raise InvalidArgumentError(message)
    ranks = np.arange(1, bins + 1, dtype=np.float64)
    counts = np.floor(scale / ranks**exponent).astype(np.int64)
    return Histogram.from_counts(counts.tolist())


def _task_params(epsilon: float, monotonic: bool = False) -> PrivacyParams:
    return PrivacyParams(epsilon, TASK_SENSITIVITY, monotonic)


def scores_error(
    q: ScoresLike,
    mechanism: Union[Mechanism, str],
    params: PrivacyParams,
    quadrature: Optional[QuadratureConfig] = None,
) -> float:
    """Exact expected error of ``mechanism`` on ``q``."""
    scores = as_scores(q)
    return expected_error(exact_pmf(mechanism, scores, params, quadrature), scores)


def ratio_vs_pf(
    q: ScoresLike,
    mechanism: Union[Mechanism, str],
    params: PrivacyParams,
    error: float,
    pf_error: float,
) -> float:
    """``error / pf_error``, redone in log space when either one underflows.

    Histograms with a wide lead drive both errors below the smallest normal
    double long before their ratio settles, so a plain quotient degrades to
    the 0/0 convention.
    """
    mechanism = Mechanism.parse(mechanism)
    if mechanism is Mechanism.PF or mechanism is Mechanism.RNM:
        return error_ratio(error, pf_error)
    if min(error, pf_error) >= np.finfo(np.float64).tiny:
        return error_ratio(error, pf_error)
    log_pf = log_expected_error(Mechanism.PF, q, params)
    if log_pf == -math.inf:
        return 1.0
    return math.exp(log_expected_error(mechanism, q, params) - log_pf)


def sweep_experiment(
    h: Histogram,
    task: str,
    epsilons: Sequence[float],
    mechanisms: Sequence[Union[Mechanism, str]] = (Mechanism.PF, Mechanism.EM),
    workers: int = 1,
    quadrature: Optional[QuadratureConfig] = None,
) -> List[ExperimentRow]:
    """One row per (ε, mechanism), in grid order then mechanism order."""
    scores = task_scores(h, task)
    tags = [Mechanism.parse(m) for m in mechanisms]
    wanted = list(dict.fromkeys([Mechanism.PF, *tags]))
    cells = [(epsilon, mechanism) for epsilon in epsilons for mechanism in wanted]

    def evaluate(cell: Tuple[float, Mechanism]) -> float:
        epsilon, mechanism = cell
        return scores_error(scores, mechanism, _task_params(epsilon), quadrature)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        errors = dict(zip(cells, pool.map(evaluate, cells)))

    rows = [
        ExperimentRow(
            epsilon=float(epsilon),
            mechanism=mechanism.value,
            task=task,
            expected_error=errors[(epsilon, mechanism)],
            ratio_vs_pf=ratio_vs_pf(
                scores,
                mechanism,
                _task_params(epsilon),
                errors[(epsilon, mechanism)],
                errors[(epsilon, Mechanism.PF)],
            ),
        )
        for epsilon in epsilons
        for mechanism in tags
    ]
    logger.info(
        "Experiment sweep finished: task=%s bins=%d cells=%d", task, len(h), len(cells)
    )
    return rows


def epsilon_for_scores_error(
    q: ScoresLike,
    mechanism: Union[Mechanism, str],
    target: float,
    delta: float = TASK_SENSITIVITY,
    bracket: Tuple[float, float] = EPSILON_BRACKET,
) -> float:
    """Bisect for the ε at which ``mechanism`` has expected error ``target``.

    Raises:
        EpsilonRangeError: ``target`` is not reached inside the bracket.
    """
    if not (target > 0 and math.isfinite(target)):
        message = f"Target error must be positive and finite, got {target}"
        raise InvalidArgumentError(message)
    scores = as_scores(q)
    low, high = bracket

    def gap(epsilon: float) -> float:
        return scores_error(scores, mechanism, PrivacyParams(epsilon, delta)) - target

    at_low, at_high = gap(low), gap(high)
    if at_low < 0:
        message = f"Target error {target} exceeds the error at ε={low} ({at_low + target:.6g})"
        raise EpsilonRangeError(message, hint="Lower the target error")
    if at_high > 0:
        message = f"Target error {target} is below the error at ε={high} ({at_high + target:.6g})"
        raise EpsilonRangeError(message, hint="Raise the target error")
    epsilon = optimize.bisect(gap, low, high, xtol=1e-15, rtol=EPSILON_RELATIVE_TOLERANCE)
    logger.debug("Solved ε=%.12g for target error %.12g", epsilon, target)
    return float(epsilon)


def epsilon_for_target_error(
    h: Histogram, task: str, mechanism: Union[Mechanism, str], target: float
) -> float:
    return epsilon_for_scores_error(task_scores(h, task), mechanism, target)


def budget_inflation(
    h: Histogram,
    task: str,
    epsilon: float,
    reference: Union[Mechanism, str] = Mechanism.PF,
    mechanism: Union[Mechanism, str] = Mechanism.EM,
) -> float:
    """Factor by which ``mechanism`` needs more ε to match ``reference`` at ε."""
    scores = task_scores(h, task)
    target = scores_error(scores, reference, _task_params(epsilon))
    if target == 0.0:
        return 1.0
    return epsilon_for_scores_error(scores, mechanism, target) / epsilon


def write_experiment_csv(rows: Sequence[ExperimentRow], stream: TextIO) -> None:
    write_csv(EXPERIMENT_HEADER, (row.as_tuple() for row in rows), stream)


def write_experiment_json(rows: Sequence[ExperimentRow], stream: TextIO) -> None:
    dump_json({"rows": [row.to_dict() for row in rows]}, stream)
