"""Synthetic binary outcomes with known probabilities, and the two miscalibration distortions.

Observations follow a logistic model on four uniform covariates:

    eta = a1 x1 + a2 x2 + a3 x3 + a4 x4 + eps,   eps ~ N(0, noise_sd^2)
    p   = 1 / (1 + exp(-eta)),                   d ~ Bernoulli(p)

Distorted scores are obtained either by raising `p` to a power (`alpha`) or by scaling the
whole linear predictor, noise included (`gamma`).
"""

import dataclasses
import enum
from typing import Annotated

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt
from scipy.special import expit

from lcsuite.errors import InvalidInputError
from lcsuite.types import FloatArray, IntArray
from lcsuite.utils import format_fraction

DEFAULT_COEFFICIENTS = (0.1, 0.05, 0.2, -0.05)
N_COVARIATES = 4

Seed = Annotated[int, Field(ge=0, lt=2**64, description="seed of the random generator")]


class DgpConfig(BaseModel):
    """Parameters of the data generating process.

    Attributes:
        n: number of observations
        coefficients: coefficients a1..a4 of the linear predictor
        noise_sd: standard deviation of the Gaussian noise added to the linear predictor
        seed: seed of the random generator
    """

    model_config = ConfigDict(frozen=True)

    n: PositiveInt = Field(default=2000, description="number of observations")
    coefficients: tuple[float, float, float, float] = Field(
        default=DEFAULT_COEFFICIENTS, description="coefficients a1..a4 of the linear predictor"
    )
    noise_sd: PositiveFloat = Field(default=0.5, description="standard deviation of the noise")
    seed: Seed


@dataclasses.dataclass(frozen=True)
class SyntheticSample:
    """A batch of synthetic observations, stored column-wise.

    Attributes:
        x: covariates, shape `(n, 4)`, uniform on [0, 1]
        eta: linear predictor, noise included
        p_true: true probabilities `sigmoid(eta)`
        d: binary outcomes
    """

    x: FloatArray
    eta: FloatArray
    p_true: FloatArray
    d: IntArray

    def __len__(self) -> int:
        return len(self.d)


class DistortionKind(str, enum.Enum):
    ALPHA = "alpha"
    GAMMA = "gamma"
    NONE = "none"


class DistortionSpec(BaseModel):
    """A monotone distortion of the true probabilities.

    Attributes:
        kind: `alpha` raises the probability to a power, `gamma` scales the linear predictor
        value: exponent or scale factor; 1 leaves the probabilities untouched
    """

    model_config = ConfigDict(frozen=True)

    kind: DistortionKind = DistortionKind.NONE
    value: PositiveFloat = 1.0

    @property
    def label(self) -> str:
        """Scenario label, e.g. `alpha=1/3`."""
        if self.kind is DistortionKind.NONE:
            return "none"
        return f"{self.kind.value}={format_fraction(self.value)}"


def linear_predictor(x: FloatArray, coefficients: tuple[float, ...], noise: FloatArray) -> FloatArray:
    """Evaluate `eta = x @ coefficients + noise` row-wise.

    >>> float(linear_predictor(np.zeros((1, 4)), DEFAULT_COEFFICIENTS, np.zeros(1))[0])
    0.0

    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != len(coefficients):
        raise InvalidInputError(f"expected {len(coefficients)} covariates, got {x.shape[1]}")
    return np.asarray(x @ np.asarray(coefficients, dtype=np.float64) + noise, dtype=np.float64)


def generate(config: DgpConfig) -> SyntheticSample:
    """Draw `config.n` observations from the data generating process.

    The draws only depend on `config`: the same configuration always yields bit-identical samples.

    Args:
        config: sample size, coefficients, noise level and seed

    Returns:
        the synthetic sample
    """
    rng = np.random.default_rng(config.seed)
    x = rng.uniform(0.0, 1.0, size=(config.n, N_COVARIATES))
    noise = rng.normal(0.0, config.noise_sd, size=config.n)
    eta = linear_predictor(x, config.coefficients, noise)
    p_true = expit(eta)
    d = rng.binomial(1, p_true).astype(np.int64)
    return SyntheticSample(x=x, eta=eta, p_true=p_true, d=d)


def distort(samples: SyntheticSample, spec: DistortionSpec) -> FloatArray:
    """Compute miscalibrated scores `p_u` from a synthetic sample.

    `alpha` gives `p_true ** alpha` and `gamma` gives `sigmoid(gamma * eta)`. A value of 1 returns the true
    probabilities exactly. Both maps are strictly increasing, so the ranking of observations is preserved.

    Args:
        samples: synthetic observations
        spec: distortion to apply

    Returns:
        distorted scores, in [0, 1]
    """
    if spec.value <= 0:
        raise InvalidInputError(f"distortion value must be positive, got {spec.value}")
    if spec.kind is DistortionKind.NONE or spec.value == 1.0:
        return samples.p_true.copy()
    if spec.kind is DistortionKind.ALPHA:
        return np.power(samples.p_true, spec.value)
    return np.asarray(expit(spec.value * samples.eta), dtype=np.float64)


def scenarios(
    alphas: tuple[float, ...] = (1 / 3, 1.0, 3.0), gammas: tuple[float, ...] = (1 / 3, 1.0, 3.0)
) -> list[DistortionSpec]:
    """List the distortion scenarios: each `alpha` with `gamma` fixed at 1, then each `gamma` with `alpha` at 1."""
    return [DistortionSpec(kind=DistortionKind.ALPHA, value=a) for a in alphas] + [
        DistortionSpec(kind=DistortionKind.GAMMA, value=g) for g in gammas
    ]
