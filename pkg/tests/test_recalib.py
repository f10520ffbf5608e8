import itertools

import numpy as np
import pytest
from scipy.special import expit

from lcsuite.dgp import DgpConfig, DistortionKind, DistortionSpec, distort, generate
from lcsuite.errors import ConvergenceWarning, InvalidInputError, MonotonicityWarning, SingleClassError
from lcsuite.locreg import LocalFit, LocRegConfig
from lcsuite.metrics import LabeledScores, lcs
from lcsuite.recalib import (
    BetaRecalibrator,
    IsotonicRecalibrator,
    LocalRecalibrator,
    PlattRecalibrator,
    beta_features,
    fit_beta,
    fit_isotonic,
    fit_local,
    fit_logistic,
    fit_platt,
    fit_recalibrator,
    pava,
)
from lcsuite.types import METHODS


def monotone_least_squares_oracle(values):
    """Best non-decreasing fit among all partitions into consecutive blocks."""
    n = len(values)
    best, best_loss = None, np.inf
    for cuts in itertools.product((False, True), repeat=n - 1):
        bounds = [0] + [i + 1 for i, cut in enumerate(cuts) if cut] + [n]
        means = [np.mean(values[a:b]) for a, b in zip(bounds, bounds[1:])]
        if any(m2 < m1 for m1, m2 in zip(means, means[1:])):
            continue
        fitted = np.repeat(means, np.diff(bounds))
        loss = np.sum((values - fitted) ** 2)
        if loss < best_loss - 1e-15:
            best, best_loss = fitted, loss
    return best


@pytest.mark.parametrize("length", range(1, 9))
def test_pava_matches_exhaustive_oracle(length):
    for labels in itertools.product((0.0, 1.0), repeat=length):
        values = np.array(labels)
        np.testing.assert_allclose(pava(values), monotone_least_squares_oracle(values), rtol=0, atol=1e-12)


def test_weighted_pava():
    np.testing.assert_allclose(pava([1.0, 0.0], weights=[3.0, 1.0]), [0.75, 0.75])
    np.testing.assert_allclose(pava([0.0, 2.0, 1.0], weights=[1.0, 1.0, 3.0]), [0.0, 1.25, 1.25])


def test_isotonic_knots():
    recalibrator = fit_isotonic(LabeledScores(scores=[0.1, 0.2, 0.3, 0.4], labels=[0, 1, 0, 1]))
    np.testing.assert_array_equal(recalibrator.knot_scores, [0.1, 0.2, 0.4])
    np.testing.assert_array_equal(recalibrator.knot_values, [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(recalibrator.apply([0.0, 0.15, 0.3, 0.4, 0.9]), [0.0, 0.0, 0.5, 1.0, 1.0])
    assert recalibrator.params() == {
        "method": "isotonic",
        "knot_scores": [0.1, 0.2, 0.4],
        "knot_values": [0.0, 0.5, 1.0],
    }


def test_isotonic_pools_tied_scores():
    recalibrator = fit_isotonic(LabeledScores(scores=[0.5, 0.5, 0.2, 0.8], labels=[1, 0, 0, 1]))
    np.testing.assert_array_equal(recalibrator.knot_scores, [0.2, 0.5, 0.8])
    np.testing.assert_array_equal(recalibrator.knot_values, [0.0, 0.5, 1.0])


def test_logistic_regression_recovers_coefficients():
    rng = np.random.default_rng(0)
    x = rng.uniform(size=20_000)
    y = rng.binomial(1, expit(2.0 * x - 1.0))
    logistic = fit_logistic(x, y)
    assert logistic.converged
    np.testing.assert_allclose(logistic.coefficients, [-1.0, 2.0], atol=0.15)
    assert (logistic.standard_errors > 0).all()
    assert logistic.standard_errors[1] < 0.1


def test_logistic_regression_under_separation():
    with pytest.warns(ConvergenceWarning):
        logistic = fit_logistic([0.0, 1.0, 2.0, 3.0], [0, 0, 1, 1])
    assert not logistic.converged


def test_logistic_regression_requires_both_classes():
    with pytest.raises(SingleClassError):
        fit_logistic([0.1, 0.2], [1, 1])


def test_platt():
    rng = np.random.default_rng(1)
    scores = rng.uniform(size=10_000)
    labels = rng.binomial(1, expit(3.0 * scores - 2.0))
    recalibrator = fit_platt(LabeledScores(scores=scores, labels=labels))
    assert recalibrator.a == pytest.approx(3.0, abs=0.3)
    assert recalibrator.b == pytest.approx(-2.0, abs=0.2)
    assert recalibrator.apply([0.5])[0] == pytest.approx(expit(recalibrator.a * 0.5 + recalibrator.b))


def test_beta_calibration_of_calibrated_scores():
    rng = np.random.default_rng(3)
    scores = rng.uniform(0.02, 0.98, size=5000)
    recalibrator = fit_beta(LabeledScores(scores=scores, labels=rng.binomial(1, scores)))
    assert recalibrator.is_monotone
    grid = np.linspace(0.05, 0.95, 19)
    assert np.abs(recalibrator.apply(grid) - grid).max() < 0.05


def test_identity_beta_map():
    scores = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(BetaRecalibrator(a=1.0, b=1.0, c=0.0).apply(scores), scores)


def test_beta_features_clip_scores():
    features = beta_features(np.array([0.0, 1.0]))
    assert np.isfinite(features).all()


def test_decreasing_relation_warns():
    rng = np.random.default_rng(2)
    scores = rng.uniform(0.05, 0.95, size=5000)
    labels = rng.binomial(1, 1.0 - scores)
    with pytest.warns(MonotonicityWarning):
        recalibrator = fit_beta(LabeledScores(scores=scores, labels=labels))
    assert not recalibrator.is_monotone


@pytest.mark.parametrize("method, expected_type", [("local0", 0), ("local1", 1), ("local2", 2)])
def test_local_recalibrators(calibrated, method, expected_type):
    recalibrator = fit_recalibrator(method, calibrated, LocRegConfig(neighbor_fraction=0.5))
    assert isinstance(recalibrator, LocalRecalibrator)
    assert recalibrator.degree == expected_type
    recalibrated = recalibrator.apply(np.linspace(0, 1, 11))
    assert ((recalibrated >= 0) & (recalibrated <= 1)).all()
    assert recalibrator.params()["method"] == method


@pytest.mark.parametrize("method", METHODS)
def test_recalibration_reduces_miscalibration(method):
    sample = generate(DgpConfig(n=4000, seed=11))
    scores = distort(sample, DistortionSpec(kind=DistortionKind.GAMMA, value=3))
    data = LabeledScores(scores=scores, labels=sample.d, true_p=sample.p_true)
    calibration, test = data.take(np.arange(2000)), data.take(np.arange(2000, 4000))
    recalibrator = fit_recalibrator(method, calibration)
    assert lcs(test.with_scores(recalibrator.apply(test.scores))) < lcs(test)


def test_fit_recalibrator_dispatch(calibrated):
    assert isinstance(fit_recalibrator("platt", calibrated), PlattRecalibrator)
    assert isinstance(fit_recalibrator("isotonic", calibrated), IsotonicRecalibrator)
    assert isinstance(fit_recalibrator("beta", calibrated), BetaRecalibrator)
    with pytest.raises(InvalidInputError, match="unknown recalibration method"):
        fit_recalibrator("histogram", calibrated)


@pytest.mark.slow
def test_logistic_regression_is_asymptotically_calibrated():
    medians = []
    for n in (500, 2000, 8000):
        values = []
        for replication in range(20):
            sample = generate(DgpConfig(n=n, noise_sd=1e-6, seed=100 + replication))
            logistic = fit_logistic(sample.x, sample.d)
            values.append(lcs(LabeledScores(scores=logistic.predict_proba(sample.x), labels=sample.d)))
        medians.append(np.median(values))
    assert medians[0] >= medians[1] >= medians[2]
    assert medians[2] < 0.01


def test_intercept_only_logistic_regression_fits_the_log_odds():
    labels = np.array([1, 0, 0, 1, 1, 1, 0, 1])
    logistic = fit_logistic(np.empty((8, 0)), labels)
    assert logistic.converged
    assert logistic.coefficients.shape == (1,)
    assert logistic.coefficients[0] == pytest.approx(np.log(5 / 3), abs=1e-8)


def test_local_recalibrator_of_a_single_class_is_zero():
    data = LabeledScores(scores=np.linspace(0.05, 0.95, 30), labels=np.zeros(30, dtype=int))
    recalibrator = fit_local(data, degree=1)
    np.testing.assert_array_equal(recalibrator.apply([0.0, 0.3, 0.77, 1.0]), 0.0)


def test_local_recalibrator_clamps_to_the_unit_interval():
    grid = np.array([0.0, 0.5, 1.0])
    local_fit = LocalFit(
        config=LocRegConfig(degree=2),
        train_x=grid,
        train_y=np.array([0.0, 1.0, 1.0]),
        eval_points=grid,
        eval_values=np.array([-0.03, 0.5, 1.04]),
    )
    recalibrator = LocalRecalibrator(local_fit=local_fit)
    np.testing.assert_array_equal(recalibrator.apply(grid), [0.0, 0.5, 1.0])
