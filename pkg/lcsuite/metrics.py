"""Calibration and goodness-of-fit metrics for binary scores."""

import dataclasses
import logging
from collections.abc import Iterable
from typing import Any, Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.stats import rankdata

from lcsuite.errors import InvalidInputError
from lcsuite.locreg import LocalFit, LocRegConfig, predict, smoothed_calibration_curve
from lcsuite.types import FloatArray, IntArray, MetricName
from lcsuite.utils import as_labels, as_scores, require_both_classes

logger = logging.getLogger(__name__)

DEFAULT_BINS = 10
DEFAULT_THRESHOLD = 0.5


@dataclasses.dataclass(frozen=True)
class LabeledScores:
    """Scores, observed labels and, for synthetic data, the true probabilities.

    Attributes:
        scores: predicted scores, in [0, 1]
        labels: observed binary outcomes
        true_p: true event probabilities, if known
    """

    scores: FloatArray
    labels: IntArray
    true_p: Optional[FloatArray] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", as_scores(self.scores, "scores"))
        object.__setattr__(self, "labels", as_labels(self.labels, "labels"))
        if len(self.scores) != len(self.labels):
            raise InvalidInputError(
                f"scores and labels must have the same length, got {len(self.scores)} and {len(self.labels)}"
            )
        if self.true_p is not None:
            true_p = as_scores(self.true_p, "true_p")
            if len(true_p) != len(self.scores):
                raise InvalidInputError(f"true_p must have {len(self.scores)} values, got {len(true_p)}")
            object.__setattr__(self, "true_p", true_p)

    def __len__(self) -> int:
        return len(self.scores)

    def take(self, indices: Any) -> "LabeledScores":
        """Select rows (with repetition allowed)."""
        indices = np.asarray(indices, dtype=np.int64)
        true_p = self.true_p[indices] if self.true_p is not None else None
        return LabeledScores(scores=self.scores[indices], labels=self.labels[indices], true_p=true_p)

    def with_scores(self, scores: Any) -> "LabeledScores":
        """Same labels and true probabilities, other scores."""
        return LabeledScores(scores=scores, labels=self.labels, true_p=self.true_p)


@dataclasses.dataclass(frozen=True)
class BinnedCurve:
    """Reliability diagram data over quantile bins.

    Attributes:
        mean_score: mean score of each bin (confidence)
        mean_outcome: observed event frequency of each bin
        accuracy: fraction of correct class predictions in each bin
        counts: number of observations of each bin
        requested_bins: number of bins asked for; merged duplicate edges can make it larger than `n_bins`
    """

    mean_score: FloatArray
    mean_outcome: FloatArray
    accuracy: FloatArray
    counts: IntArray
    requested_bins: int

    @property
    def n_bins(self) -> int:
        return len(self.counts)


class ClassificationReport(BaseModel):
    """Confusion matrix and rates at a probability threshold.

    Undefined rates (empty positive or negative class) are NaN.
    """

    model_config = ConfigDict(frozen=True)

    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    sensitivity: float
    specificity: float


def _require_rows(data: LabeledScores) -> None:
    if len(data) == 0:
        raise InvalidInputError("metrics require at least one observation")


def brier(data: LabeledScores) -> float:
    """Mean squared difference between scores and observed outcomes."""
    _require_rows(data)
    return float(np.mean((data.scores - data.labels) ** 2))


def true_mse(data: LabeledScores, candidate_scores: Any) -> float:
    """Mean squared difference between candidate scores and the true probabilities."""
    _require_rows(data)
    if data.true_p is None:
        raise InvalidInputError("the true MSE requires true probabilities")
    candidate = np.asarray(candidate_scores, dtype=np.float64)
    if candidate.shape != data.true_p.shape:
        raise InvalidInputError(f"expected {len(data.true_p)} candidate scores, got {candidate.shape}")
    return float(np.mean((data.true_p - candidate) ** 2))


def _quantile_bins(scores: FloatArray, n_bins: int) -> list[IntArray]:
    """Split observations into `n_bins` groups of consecutive sorted scores.

    Bin boundaries falling inside a run of equal scores are dropped, which merges the two bins around them.
    """
    n = len(scores)
    if n_bins < 1:
        raise InvalidInputError(f"the number of bins must be positive, got {n_bins}")
    if n_bins > n:
        raise InvalidInputError(f"can't build {n_bins} bins from {n} observations")
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    boundaries = np.linspace(0, n, n_bins + 1).astype(np.int64)
    inner = [int(b) for b in boundaries[1:-1] if sorted_scores[b - 1] != sorted_scores[b]]
    if len(inner) < n_bins - 1:
        logger.debug("Merged %d quantile bins with duplicate edges", n_bins - 1 - len(inner))
    return np.split(order, inner)


def quantile_calibration_curve(
    data: LabeledScores, n_bins: int = DEFAULT_BINS, threshold: float = DEFAULT_THRESHOLD
) -> BinnedCurve:
    """Build a reliability diagram from bins defined by the empirical quantiles of the scores.

    Args:
        data: scores and labels
        n_bins: requested number of bins
        threshold: probability threshold used for the per-bin accuracy

    Returns:
        per-bin mean score, event frequency, accuracy and count
    """
    _require_rows(data)
    bins = _quantile_bins(data.scores, n_bins)
    correct = (data.scores >= threshold).astype(np.int64) == data.labels
    return BinnedCurve(
        mean_score=np.array([data.scores[b].mean() for b in bins]),
        mean_outcome=np.array([data.labels[b].mean() for b in bins]),
        accuracy=np.array([correct[b].mean() for b in bins]),
        counts=np.array([len(b) for b in bins], dtype=np.int64),
        requested_bins=n_bins,
    )


def ece(data: LabeledScores, n_bins: int = DEFAULT_BINS, threshold: float = DEFAULT_THRESHOLD) -> float:
    """Expected calibration error: count-weighted mean of `|accuracy - confidence|` over quantile bins.

    The accuracy of a bin is the fraction of correct class predictions at `threshold`, and its confidence is
    the mean score of the bin.
    """
    curve = quantile_calibration_curve(data, n_bins=n_bins, threshold=threshold)
    weights = curve.counts / curve.counts.sum()
    return float(np.sum(weights * np.abs(curve.accuracy - curve.mean_score)))


def density_weights(scores: FloatArray, grid: FloatArray) -> FloatArray:
    """Share of the scores whose nearest grid point is each point of a linearly spaced `grid`.

    >>> density_weights(np.array([0.0, 0.1, 0.9, 1.0]), np.linspace(0, 1, 3)).tolist()
    [0.5, 0.0, 0.5]

    """
    low, high = grid[0], grid[-1]
    if high == low:
        index = np.zeros(len(scores), dtype=np.int64)
    else:
        position = (scores - low) / (high - low) * (len(grid) - 1)
        index = np.clip(np.rint(position), 0, len(grid) - 1).astype(np.int64)
    counts = np.bincount(index, minlength=len(grid))
    return np.asarray(counts / len(scores), dtype=np.float64)


def lcs_from_curve(curve: LocalFit, scores: FloatArray) -> float:
    """Density-weighted squared deviation of a calibration curve from the bisector."""
    weights = density_weights(scores, curve.eval_points)
    return float(np.sum(weights * (curve.eval_values - curve.eval_points) ** 2))


def lcs(data: LabeledScores, config: Optional[LocRegConfig] = None) -> float:
    """Local Calibration Score.

    A degree-0 local regression of the labels on the scores is evaluated on a linearly spaced grid `l_i`;
    the score is `sum_i w_i (g(l_i) - l_i)^2` where `w_i` is the share of observed scores closest to `l_i`.
    """
    if len(data) < 2:
        raise InvalidInputError(f"the LCS requires at least 2 observations, got {len(data)}")
    curve = smoothed_calibration_curve(data.scores, data.labels, config or LocRegConfig())
    return lcs_from_curve(curve, data.scores)


def _rate(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else float("nan")


def classification_report(data: LabeledScores, threshold: float = DEFAULT_THRESHOLD) -> ClassificationReport:
    """Confusion matrix of the rule `score >= threshold => class 1`."""
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInputError(f"threshold must lie in [0, 1], got {threshold}")
    predicted = data.scores >= threshold
    actual = data.labels == 1
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    tn = int(np.sum(~predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    return ClassificationReport(
        threshold=threshold,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=_rate(tp + tn, len(data)),
        sensitivity=_rate(tp, tp + fn),
        specificity=_rate(tn, tn + fp),
    )


def auc(data: LabeledScores) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic; tied pairs count one half."""
    require_both_classes(data.labels)
    ranks = rankdata(data.scores, method="average")
    positives = data.labels == 1
    n_pos = int(positives.sum())
    n_neg = len(data) - n_pos
    u_statistic = ranks[positives].sum() - n_pos * (n_pos + 1) / 2
    return float(u_statistic / (n_pos * n_neg))


def curve_on_grid(config: LocRegConfig, grid: FloatArray) -> Callable[[LabeledScores], FloatArray]:
    """Estimator evaluating the smoothed calibration curve on a fixed `grid`."""

    def estimate(data: LabeledScores) -> FloatArray:
        return predict(smoothed_calibration_curve(data.scores, data.labels, config), grid)

    return estimate


def percentile_band(statistics: FloatArray, level: float) -> tuple[FloatArray, FloatArray]:
    """Percentile interval of bootstrap statistics, column-wise."""
    tail = (1.0 - level) / 2.0
    low, high = np.quantile(statistics, [tail, 1.0 - tail], axis=0)
    return np.asarray(low, dtype=np.float64), np.asarray(high, dtype=np.float64)


def bootstrap_band(
    data: LabeledScores,
    estimator: Callable[[LabeledScores], FloatArray],
    n_boot: int = 200,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[FloatArray, FloatArray]:
    """Percentile bootstrap band of a pointwise estimator.

    Args:
        data: observations, resampled by rows with replacement
        estimator: maps data to values on a fixed set of points (see `curve_on_grid`)
        n_boot: number of resamples, at least 2
        level: confidence level in (0, 1)
        seed: seed of the resampling

    Returns:
        lower and upper bounds at each point
    """
    if n_boot < 2:
        raise InvalidInputError(f"at least 2 bootstrap resamples are required, got {n_boot}")
    if not 0.0 < level < 1.0:
        raise InvalidInputError(f"level must lie in (0, 1), got {level}")
    rng = np.random.default_rng(seed)
    n = len(data)
    statistics = np.array([estimator(data.take(rng.integers(0, n, size=n))) for _ in range(n_boot)])
    return percentile_band(statistics, level)


def compute_metrics(
    data: LabeledScores,
    names: Iterable[MetricName],
    *,
    n_bins: int = DEFAULT_BINS,
    threshold: float = DEFAULT_THRESHOLD,
    locreg: Optional[LocRegConfig] = None,
) -> dict[MetricName, float]:
    """Evaluate several metrics at once.

    Metrics that are undefined on `data` (true MSE without true probabilities, AUC on a single class) are NaN.
    """
    names = list(names)
    results: dict[MetricName, float] = {}
    report = classification_report(data, threshold) if {"accuracy", "sensitivity", "specificity"} & set(names) else None
    for name in names:
        if name == "brier":
            results[name] = brier(data)
        elif name == "true_mse":
            results[name] = true_mse(data, data.scores) if data.true_p is not None else float("nan")
        elif name == "ece":
            results[name] = ece(data, n_bins=n_bins, threshold=threshold)
        elif name == "lcs":
            results[name] = lcs(data, locreg)
        elif name == "auc":
            both = 0 < int(data.labels.sum()) < len(data)
            results[name] = auc(data) if both else float("nan")
        elif report is not None and name in ("accuracy", "sensitivity", "specificity"):
            results[name] = float(getattr(report, name))
        else:
            raise InvalidInputError(f"unknown metric `{name}`")
    return results
