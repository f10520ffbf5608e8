"""Local polynomial regression of degree 0, 1 or 2 on a single predictor.

The fit is evaluated on `grid_size` linearly spaced points spanning the observed predictor range. At each
point, the nearest `ceil(neighbor_fraction * n)` observations are weighted with the tricube kernel
`(1 - u^3)^3`, `u` being the distance divided by the largest neighbor distance, and a weighted least squares
polynomial centered on the point gives the fitted value. Predictions elsewhere interpolate linearly between
grid points.
"""

import dataclasses
import logging
import math
from typing import Any, Literal

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field

from lcsuite.errors import InvalidInputError
from lcsuite.types import FloatArray
from lcsuite.utils import as_float_array, as_labels, as_scores

logger = logging.getLogger(__name__)

RIDGE_JITTER = 1e-8
_MAX_CONDITION = 1e12


class LocRegConfig(BaseModel):
    """Settings of the local regression.

    Attributes:
        degree: degree of the local polynomial
        neighbor_fraction: fraction of the observations used in each neighborhood
        grid_size: number of evaluation points
    """

    model_config = ConfigDict(frozen=True)

    degree: Literal[0, 1, 2] = Field(default=0, description="degree of the local polynomial")
    neighbor_fraction: float = Field(default=0.7, gt=0, le=1, description="fraction of nearest neighbors")
    grid_size: int = Field(default=101, ge=2, description="number of evaluation points")


@dataclasses.dataclass(frozen=True)
class LocalFit:
    """A fitted local regression, immutable once built.

    Attributes:
        config: settings used for the fit
        train_x: predictor values of the training data
        train_y: responses of the training data
        eval_points: strictly increasing evaluation grid spanning `[min(train_x), max(train_x)]`; a single point
            when every `train_x` is equal
        eval_values: fitted values at `eval_points`
    """

    config: LocRegConfig
    train_x: FloatArray
    train_y: FloatArray
    eval_points: FloatArray
    eval_values: FloatArray


def tricube(u: FloatArray) -> FloatArray:
    """Tricube kernel, zero outside [0, 1].

    >>> tricube(np.array([0.0, 1.0, 2.0])).tolist()
    [1.0, 0.0, 0.0]

    """
    u = np.clip(np.abs(u), 0.0, 1.0)
    return np.asarray((1.0 - u**3) ** 3, dtype=np.float64)


def neighborhood_size(n: int, config: LocRegConfig) -> int:
    """Number of neighbors used at each evaluation point."""
    k = math.ceil(config.neighbor_fraction * n)
    return min(n, max(k, config.degree + 1))


def neighborhood_weights(x: FloatArray, point: float, k: int) -> FloatArray:
    """Tricube weights of every observation around `point`; observations outside the neighborhood get 0.

    When every neighbor sits at the same distance the kernel vanishes everywhere, and all observations at
    that distance share a uniform weight instead.
    """
    distances = np.abs(x - point)
    if k < len(x):
        radius = float(np.partition(distances, k - 1)[k - 1])
    else:
        radius = float(distances.max())
    if radius == 0.0:
        return (distances == 0.0).astype(np.float64)
    weights = tricube(distances / radius)
    if weights.sum() == 0.0:
        return (distances <= radius).astype(np.float64)
    return weights


def _local_polynomial(x: FloatArray, y: FloatArray, weights: FloatArray, point: float, degree: int) -> float:
    """Weighted least squares polynomial centered on `point`; return its intercept."""
    mask = weights > 0.0
    w = weights[mask]
    if degree == 0:
        return float(np.dot(w, y[mask]) / w.sum())
    design = np.vander(x[mask] - point, degree + 1, increasing=True)
    normal = design.T @ (design * w[:, None])
    rhs = design.T @ (w * y[mask])
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = np.linalg.cond(normal)
    if not condition < _MAX_CONDITION:
        # Degenerate neighborhood: ridge the slope terms, never the intercept
        normal = normal + np.diag([0.0] + [RIDGE_JITTER] * degree)
    try:
        coefficients = scipy.linalg.solve(normal, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        normal = normal + np.diag([0.0] + [RIDGE_JITTER] * degree)
        coefficients = scipy.linalg.solve(normal, rhs, assume_a="sym")
    return float(coefficients[0])


def fit(x: Any, y: Any, config: LocRegConfig) -> LocalFit:
    """Fit a local polynomial regression of `y` on `x`.

    Args:
        x: predictor values, finite
        y: responses, same length as `x`
        config: degree, neighborhood size and grid size

    Returns:
        the fitted model, evaluated on `config.grid_size` points spanning the range of `x`, or on the single
        value of `x` if it is constant
    """
    x = as_float_array(x, "x")
    y = as_float_array(y, "y")
    if len(x) == 0:
        raise InvalidInputError("can't fit a local regression on empty data")
    if len(x) != len(y):
        raise InvalidInputError(f"`x` and `y` must have the same length, got {len(x)} and {len(y)}")
    if len(x) < config.degree + 1:
        raise InvalidInputError(
            f"degree {config.degree} requires at least {config.degree + 1} observations, got {len(x)}"
        )
    if not np.isfinite(x).all():
        raise InvalidInputError("`x` must be finite")
    if x.min() == x.max():
        logger.debug("All predictor values equal %s: fitting a single point", x.min())
        grid = x[:1].copy()
    else:
        grid = np.linspace(x.min(), x.max(), config.grid_size)
    k = neighborhood_size(len(x), config)
    values = np.array(
        [_local_polynomial(x, y, neighborhood_weights(x, point, k), point, config.degree) for point in grid],
        dtype=np.float64,
    )
    return LocalFit(config=config, train_x=x, train_y=y, eval_points=grid, eval_values=values)


def predict(local_fit: LocalFit, queries: Any) -> FloatArray:
    """Interpolate the fitted values linearly; queries outside the grid take the nearest end value.

    Args:
        local_fit: fitted model
        queries: points where to predict

    Returns:
        predicted values, same shape as `queries`
    """
    queries = as_float_array(np.atleast_1d(queries), "queries")
    if local_fit.eval_points[0] == local_fit.eval_points[-1]:
        return np.full(queries.shape, local_fit.eval_values[0], dtype=np.float64)
    return np.asarray(np.interp(queries, local_fit.eval_points, local_fit.eval_values), dtype=np.float64)


def smoothed_calibration_curve(scores: Any, labels: Any, config: LocRegConfig) -> LocalFit:
    """Estimate the calibration curve `E[D | score]` with a local regression of degree 0.

    The degree of `config` is ignored: a local mean of the observed events is what the curve is defined as.
    """
    scores = as_scores(scores)
    labels = as_labels(labels)
    if config.degree != 0:
        config = config.model_copy(update={"degree": 0})
    return fit(scores, labels.astype(np.float64), config)
