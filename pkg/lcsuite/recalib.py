"""Post-hoc recalibration maps: Platt scaling, isotonic regression, beta calibration and local regression.

All recalibrators are fitted on a calibration set of (score, label) pairs and map raw scores to
recalibrated scores in [0, 1]. Fitted recalibrators are immutable.
"""

import abc
import dataclasses
import logging
import warnings
from typing import Any, ClassVar, Optional, Union

import numpy as np
import scipy.linalg
from scipy.special import expit

from lcsuite import locreg
from lcsuite.errors import ConvergenceWarning, InvalidInputError, MonotonicityWarning
from lcsuite.locreg import LocalFit, LocRegConfig
from lcsuite.metrics import LabeledScores
from lcsuite.types import FloatArray, MethodName
from lcsuite.utils import as_float_array, as_labels, require_both_classes

logger = logging.getLogger(__name__)

SCORE_CLIP = 1e-6
LOGISTIC_TOLERANCE = 1e-8
LOGISTIC_MAX_ITER = 100
# A log-likelihood this close to 0 means the classes are (quasi-)separated
_SEPARATION_LOGLIK = -1e-6

JsonValue = Union[float, int, str, list[float]]


@dataclasses.dataclass(frozen=True)
class LogisticFit:
    """Maximum likelihood logistic regression.

    Attributes:
        coefficients: intercept followed by one coefficient per feature
        converged: whether the gradient max-norm went below the tolerance
        iterations: number of Newton iterations performed
        log_likelihood: log-likelihood at `coefficients`
        standard_errors: square roots of the diagonal of the inverse information matrix
    """

    coefficients: FloatArray
    converged: bool
    iterations: int
    log_likelihood: float
    standard_errors: FloatArray

    def predict_proba(self, features: Any) -> FloatArray:
        design = _design_matrix(features)
        return np.asarray(expit(design @ self.coefficients), dtype=np.float64)


def _design_matrix(features: Any, n: Optional[int] = None) -> FloatArray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    if features.size == 0 and n is not None:
        features = np.empty((n, 0))
    return np.column_stack([np.ones(features.shape[0]), features])


def _log_likelihood(design: FloatArray, labels: FloatArray, coefficients: FloatArray) -> float:
    eta = design @ coefficients
    return float(np.sum(labels * eta - np.logaddexp(0.0, eta)))


def fit_logistic(
    features: Any, labels: Any, tol: float = LOGISTIC_TOLERANCE, max_iter: int = LOGISTIC_MAX_ITER
) -> LogisticFit:
    """Fit a logistic regression with an intercept by Newton-Raphson (IRLS).

    Iterations stop once the max-norm of the gradient is below `tol`. Under complete separation the likelihood
    has no maximum: the fit is returned with `converged=False` and a `ConvergenceWarning`.

    Args:
        features: matrix of shape `(n, k)`; `k` may be 0 for an intercept-only model
        labels: binary outcomes, both classes present
        tol: tolerance on the gradient max-norm
        max_iter: maximum number of Newton iterations

    Returns:
        the fitted model
    """
    y = as_labels(labels).astype(np.float64)
    design = _design_matrix(features, n=len(y))
    if design.shape[0] != len(y):
        raise InvalidInputError(f"features have {design.shape[0]} rows but there are {len(y)} labels")
    if not np.isfinite(design).all():
        raise InvalidInputError("features must be finite")
    require_both_classes(y.astype(np.int64))
    n, p = design.shape
    if n <= p - 1:
        raise InvalidInputError(f"logistic regression needs more observations than features, got {n} <= {p - 1}")

    beta = np.zeros(p)
    loglik = _log_likelihood(design, y, beta)
    converged = False
    iterations = 0
    information = np.eye(p)
    for iterations in range(1, max_iter + 1):
        prob = expit(design @ beta)
        gradient = design.T @ (y - prob)
        information = design.T @ (design * (prob * (1.0 - prob))[:, None])
        if np.max(np.abs(gradient)) < tol:
            converged = True
            iterations -= 1
            break
        try:
            step = scipy.linalg.solve(information, gradient, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            logger.debug("Singular information matrix after %d iterations", iterations)
            break
        # Step halving keeps the likelihood non-decreasing
        for _ in range(30):
            candidate = beta + step
            candidate_loglik = _log_likelihood(design, y, candidate)
            if candidate_loglik >= loglik - 1e-12 * abs(loglik):
                break
            step = step / 2.0
        beta, loglik = candidate, candidate_loglik

    if loglik > _SEPARATION_LOGLIK:
        converged = False
    if not converged:
        message = f"logistic regression did not converge after {iterations} iterations (log-likelihood {loglik:.3g})"
        logger.warning(message)
        warnings.warn(message, ConvergenceWarning, stacklevel=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        try:
            covariance = scipy.linalg.inv(information)
            standard_errors = np.sqrt(np.abs(np.diag(covariance)))
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            standard_errors = np.full(p, np.nan)
    return LogisticFit(
        coefficients=beta,
        converged=converged,
        iterations=iterations,
        log_likelihood=loglik,
        standard_errors=standard_errors,
    )


class Recalibrator(abc.ABC):
    """A fitted map from raw scores to recalibrated scores."""

    method: ClassVar[str]

    def apply(self, scores: Any) -> FloatArray:
        """Recalibrate `scores`; the output is clamped to [0, 1]."""
        scores = as_float_array(np.atleast_1d(scores), "scores")
        return np.clip(self._transform(scores), 0.0, 1.0)

    @abc.abstractmethod
    def _transform(self, scores: FloatArray) -> FloatArray:
        pass

    @abc.abstractmethod
    def params(self) -> dict[str, JsonValue]:
        """Fitted parameters, as a JSON-compatible mapping."""


@dataclasses.dataclass(frozen=True)
class PlattRecalibrator(Recalibrator):
    """`g(s) = 1 / (1 + exp(-(a s + b)))`."""

    method: ClassVar[str] = "platt"

    a: float
    b: float

    def _transform(self, scores: FloatArray) -> FloatArray:
        return np.asarray(expit(self.a * scores + self.b), dtype=np.float64)

    def params(self) -> dict[str, JsonValue]:
        return {"method": self.method, "a": self.a, "b": self.b}


@dataclasses.dataclass(frozen=True)
class IsotonicRecalibrator(Recalibrator):
    """Non-decreasing step function; each knot starts a step that runs until the next knot."""

    method: ClassVar[str] = "isotonic"

    knot_scores: FloatArray
    knot_values: FloatArray

    def _transform(self, scores: FloatArray) -> FloatArray:
        index = np.searchsorted(self.knot_scores, scores, side="right") - 1
        return np.asarray(self.knot_values[np.clip(index, 0, len(self.knot_values) - 1)], dtype=np.float64)

    def params(self) -> dict[str, JsonValue]:
        return {
            "method": self.method,
            "knot_scores": self.knot_scores.tolist(),
            "knot_values": self.knot_values.tolist(),
        }


@dataclasses.dataclass(frozen=True)
class BetaRecalibrator(Recalibrator):
    """`g(s) = 1 / (1 + exp(-c) (1 - s)^b / s^a)`, which is the identity for `(a, b, c) = (1, 1, 0)`."""

    method: ClassVar[str] = "beta"

    a: float
    b: float
    c: float

    @property
    def is_monotone(self) -> bool:
        return self.a >= 0 and self.b >= 0

    def _transform(self, scores: FloatArray) -> FloatArray:
        clipped = np.clip(scores, SCORE_CLIP, 1.0 - SCORE_CLIP)
        eta = self.c + self.a * np.log(clipped) - self.b * np.log1p(-clipped)
        return np.asarray(expit(eta), dtype=np.float64)

    def params(self) -> dict[str, JsonValue]:
        return {"method": self.method, "a": self.a, "b": self.b, "c": self.c}


@dataclasses.dataclass(frozen=True)
class LocalRecalibrator(Recalibrator):
    """Local regression of the labels on the scores."""

    method: ClassVar[str] = "local"

    local_fit: LocalFit

    @property
    def degree(self) -> int:
        return self.local_fit.config.degree

    def _transform(self, scores: FloatArray) -> FloatArray:
        return locreg.predict(self.local_fit, scores)

    def params(self) -> dict[str, JsonValue]:
        return {
            "method": f"local{self.degree}",
            "degree": self.degree,
            "neighbor_fraction": self.local_fit.config.neighbor_fraction,
            "grid": self.local_fit.eval_points.tolist(),
            "values": self.local_fit.eval_values.tolist(),
        }


def fit_platt(data: LabeledScores) -> PlattRecalibrator:
    """Platt scaling: logistic regression of the labels on the raw scores."""
    logistic = fit_logistic(data.scores[:, None], data.labels)
    b, a = logistic.coefficients
    return PlattRecalibrator(a=float(a), b=float(b))


def pava(values: Any, weights: Optional[Any] = None) -> FloatArray:
    """Pool adjacent violators: the non-decreasing sequence closest to `values` in weighted least squares.

    >>> pava([0, 1, 0, 1]).tolist()
    [0.0, 0.5, 0.5, 1.0]

    """
    y = np.asarray(values, dtype=np.float64)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    # Each block: [weighted mean, total weight, number of elements]
    blocks: list[list[float]] = []
    for value, weight in zip(y, w):
        blocks.append([value, weight, 1])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            mean, total, count = blocks.pop()
            previous = blocks[-1]
            merged = previous[1] + total
            previous[0] = (previous[0] * previous[1] + mean * total) / merged
            previous[1] = merged
            previous[2] += count
    return np.repeat([b[0] for b in blocks], [int(b[2]) for b in blocks]).astype(np.float64)


def fit_isotonic(data: LabeledScores) -> IsotonicRecalibrator:
    """Isotonic regression of the labels on the scores.

    Labels are ordered by score, observations sharing a score are pooled, and the pooled means are made
    non-decreasing with `pava`. Consecutive equal values collapse into a single step.
    """
    if len(data) == 0:
        raise InvalidInputError("isotonic regression requires at least one observation")
    unique_scores, inverse, counts = np.unique(data.scores, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=data.labels.astype(np.float64), minlength=len(unique_scores))
    fitted = pava(sums / counts, counts.astype(np.float64))
    starts = np.concatenate(([True], np.diff(fitted) != 0.0))
    return IsotonicRecalibrator(knot_scores=unique_scores[starts], knot_values=fitted[starts])


def beta_features(scores: FloatArray) -> FloatArray:
    """Features `(ln s, -ln(1 - s))` of beta calibration, on scores clipped away from 0 and 1."""
    clipped = np.clip(scores, SCORE_CLIP, 1.0 - SCORE_CLIP)
    return np.column_stack([np.log(clipped), -np.log1p(-clipped)])


def fit_beta(data: LabeledScores) -> BetaRecalibrator:
    """Beta calibration: logistic regression of the labels on `ln s` and `-ln(1 - s)`.

    A negative `a` or `b` makes the map non-monotone; the fit is kept and a `MonotonicityWarning` is emitted.
    """
    logistic = fit_logistic(beta_features(data.scores), data.labels)
    c, a, b = (float(v) for v in logistic.coefficients)
    recalibrator = BetaRecalibrator(a=a, b=b, c=c)
    if not recalibrator.is_monotone:
        message = f"beta calibration fitted a={a:.4g}, b={b:.4g}: the map is not monotone"
        logger.warning(message)
        warnings.warn(message, MonotonicityWarning, stacklevel=2)
    return recalibrator


def fit_local(data: LabeledScores, degree: int = 0, config: Optional[LocRegConfig] = None) -> LocalRecalibrator:
    """Local regression of the labels on the scores; predictions are clamped to [0, 1] when applied."""
    if degree not in (0, 1, 2):
        raise InvalidInputError(f"degree must be 0, 1 or 2, got {degree}")
    config = (config or LocRegConfig()).model_copy(update={"degree": degree})
    return LocalRecalibrator(local_fit=locreg.fit(data.scores, data.labels.astype(np.float64), config))


def fit_recalibrator(method: MethodName, data: LabeledScores, config: Optional[LocRegConfig] = None) -> Recalibrator:
    """Fit the recalibrator named `method` on a calibration set."""
    if method == "platt":
        return fit_platt(data)
    if method == "isotonic":
        return fit_isotonic(data)
    if method == "beta":
        return fit_beta(data)
    if method in ("local0", "local1", "local2"):
        return fit_local(data, degree=int(method[-1]), config=config)
    raise InvalidInputError(f"unknown recalibration method `{method}`")


def apply(recalibrator: Recalibrator, scores: Any) -> FloatArray:
    """Recalibrate `scores` with a fitted recalibrator."""
    return recalibrator.apply(scores)
