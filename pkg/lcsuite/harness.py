"""Replication studies over synthetic and tabular data.

Every study returns a long-format table with one row per
`(replication, scenario, method, split, metric)` cell and the columns of `STUDY_COLUMNS`:

- `replication`: replication (or calibration/test split) index, starting at 0
- `scenario`: distortion label such as `gamma=3`, or forest kind for the random forest study
- `method`: `true_prob`, `uncalibrated` or a recalibration method
- `split`: `full` when the whole sample is scored, else `calibration` or `test`
- `metric`, `value`: metric name and value, NaN when the cell failed
- `delta`: value minus the `uncalibrated` value of the same replication, scenario, split and metric

Replication `r` draws from seed `seed + r`, so replications don't depend on each other nor on how many run.
"""

import dataclasses
import functools
import logging
from collections.abc import Sequence
from concurrent import futures
from typing import Annotated, Any, Callable, Optional, TypeVar

import numpy as np
import pandas as pd
from annotated_types import Ge, Gt, Le, Lt
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PositiveInt, model_validator

from lcsuite import dgp, forest
from lcsuite.data import TabularDataset, partition, smote
from lcsuite.data import split as split_rows
from lcsuite.dgp import DgpConfig, DistortionSpec, Seed
from lcsuite.errors import LcsuiteError
from lcsuite.locreg import LocRegConfig
from lcsuite.metrics import (
    DEFAULT_BINS,
    DEFAULT_THRESHOLD,
    LabeledScores,
    compute_metrics,
    curve_on_grid,
    percentile_band,
)
from lcsuite.recalib import Recalibrator, fit_recalibrator
from lcsuite.types import METHODS, METRICS, FloatArray, ForestKind, MethodName, MetricName, SplitName
from lcsuite.utils import FractionFloat, split_commas

logger = logging.getLogger(__name__)

STUDY_COLUMNS = ("replication", "scenario", "method", "split", "metric", "value", "delta")
TRACE_COLUMNS = ("replication", "scenario", "ntree", "mtry", "nodesize", "criterion", "auc", "lcs")
TRACE_METRICS: tuple[MetricName, ...] = ("auc", "lcs")
BASELINE = "uncalibrated"
TRUE_PROB = "true_prob"
FULL_SCALE_REPLICATIONS = 200
HISTOGRAM_BINS = 20

PositiveFraction = Annotated[FractionFloat, Gt(0)]
OpenUnitFraction = Annotated[FractionFloat, Gt(0), Lt(1)]
_CELL_ERRORS = (LcsuiteError, ValueError, ArithmeticError, np.linalg.LinAlgError)

Row = tuple[int, str, str, str, str, float, float]
T = TypeVar("T")


class _StudyBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    methods: Annotated[tuple[MethodName, ...], BeforeValidator(split_commas)] = Field(
        default=METHODS, description="recalibration methods"
    )
    n_bins: PositiveInt = Field(default=DEFAULT_BINS, description="quantile bins of the ECE")
    threshold: Annotated[FractionFloat, Ge(0), Le(1)] = Field(
        default=DEFAULT_THRESHOLD, description="classification threshold"
    )
    neighbor_fraction: Annotated[FractionFloat, Gt(0), Le(1)] = Field(
        default=0.7, description="neighbor fraction of the local regressions"
    )
    grid_size: Annotated[int, Ge(2)] = Field(default=101, description="evaluation points of the local regressions")
    n_jobs: PositiveInt = Field(default=1, description="worker processes")
    seed: Seed

    def locreg_config(self, degree: int = 0) -> LocRegConfig:
        return LocRegConfig(degree=degree, neighbor_fraction=self.neighbor_fraction, grid_size=self.grid_size)


class StudyConfig(_StudyBase):
    """Settings of the studies on synthetic data.

    Scenarios vary `alpha` over `alphas` with `gamma` fixed at 1, then `gamma` over `gammas` with `alpha` at 1.
    """

    alphas: Annotated[tuple[PositiveFraction, ...], BeforeValidator(split_commas)] = Field(
        default=(1 / 3, 1.0, 3.0), description="exponents of the alpha distortion"
    )
    gammas: Annotated[tuple[PositiveFraction, ...], BeforeValidator(split_commas)] = Field(
        default=(1 / 3, 1.0, 3.0), description="scale factors of the gamma distortion"
    )
    n: PositiveInt = Field(default=2000, description="observations per replication")
    replications: PositiveInt = Field(default=50, description="number of replications")
    metrics: Annotated[tuple[MetricName, ...], BeforeValidator(split_commas)] = Field(
        default=METRICS, description="metrics to compute"
    )
    calibration_fraction: OpenUnitFraction = Field(
        default=0.5, description="share of each sample used to fit recalibrators, the rest being the test set"
    )
    n_boot: Annotated[int, Ge(2)] = Field(default=200, description="bootstrap resamples of the curve bands")

    @property
    def scenarios(self) -> list[DistortionSpec]:
        return dgp.scenarios(self.alphas, self.gammas)

    def dgp_config(self, replication: int) -> DgpConfig:
        return DgpConfig(n=self.n, seed=self.seed + replication)


class RfStudyConfig(_StudyBase):
    """Settings of the random forest study on a tabular dataset.

    The rows are split once into a training part and a held-out part; forests are tuned on the training part by
    out-of-bag grid search, then the held-out part is split `splits` times into calibration and test sets.
    """

    splits: PositiveInt = Field(default=20, description="calibration/test splits of the held-out rows")
    fractions: Annotated[tuple[PositiveFraction, PositiveFraction, PositiveFraction], BeforeValidator(split_commas)] = (
        Field(default=(0.5, 0.25, 0.25), description="train, calibration and test fractions")
    )
    kinds: Annotated[tuple[ForestKind, ...], BeforeValidator(split_commas)] = Field(
        default=("classifier", "regressor"), description="forest kinds to compare"
    )
    metrics: Annotated[tuple[MetricName, ...], BeforeValidator(split_commas)] = Field(
        default=("auc", "lcs", "brier", "ece"), description="metrics to compute"
    )
    smote: bool = Field(default=False, description="oversample the minority class of the training rows")
    smote_rate: Annotated[int, Gt(0)] = Field(default=200, description="SMOTE rate, in percent")
    smote_k: PositiveInt = Field(default=5, description="SMOTE nearest neighbors")
    full_scale: bool = Field(default=False, description="use the full hyperparameter grid")

    @model_validator(mode="after")
    def _check_fractions(self) -> "RfStudyConfig":
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got {sum(self.fractions)}")
        return self


@dataclasses.dataclass(frozen=True)
class CurveStudy:
    """Average smoothed calibration curves per scenario.

    Attributes:
        curves: columns `scenario, grid, estimate, lo, hi`; `estimate` is the mean curve over replications and
            `lo`/`hi` a 95% bootstrap band of that mean
        histograms: columns `scenario, bin_low, bin_high, count`, the scores pooled over replications
    """

    curves: pd.DataFrame
    histograms: pd.DataFrame


@dataclasses.dataclass(frozen=True)
class RfStudy:
    """Result of `run_rf_study`.

    Attributes:
        table: long-format study table, one scenario per forest kind
        trace: AUC and LCS of the uncalibrated test scores of every grid configuration, for every split
        grids: out-of-bag grid search of each forest kind
    """

    table: pd.DataFrame
    trace: pd.DataFrame
    grids: dict[str, forest.GridResult]


def study_table(rows: Sequence[Row]) -> pd.DataFrame:
    """Build a study table from rows ordered like `STUDY_COLUMNS`."""
    table = pd.DataFrame(list(rows), columns=list(STUDY_COLUMNS))
    return table.astype({"replication": np.int64, "value": np.float64, "delta": np.float64})


def _evaluate(data: LabeledScores, names: Sequence[MetricName], config: _StudyBase) -> dict[MetricName, float]:
    return compute_metrics(data, names, n_bins=config.n_bins, threshold=config.threshold, locreg=config.locreg_config())


def _evaluate_recalibrated(
    recalibrator: Recalibrator, data: LabeledScores, names: Sequence[MetricName], config: _StudyBase
) -> dict[MetricName, float]:
    return _evaluate(data.with_scores(recalibrator.apply(data.scores)), names, config)


def _guarded(
    cell: str, names: Sequence[MetricName], evaluate: Callable[..., dict[MetricName, float]], *args: Any
) -> dict[MetricName, float]:
    """Evaluate a cell; a failure gives NaN for every metric of the cell."""
    try:
        return evaluate(*args)
    except _CELL_ERRORS as e:
        logger.warning("Cell %s failed, recorded as NaN: %s: %s", cell, type(e).__name__, e)
        return {name: float("nan") for name in names}


def _run_replications(worker: Callable[[int], T], replications: int, n_jobs: int) -> list[T]:
    """Run `worker` on every replication index, in a process pool when `n_jobs > 1`; results keep replication order."""
    results: dict[int, T] = {}
    if n_jobs == 1:
        for r in range(replications):
            results[r] = worker(r)
            logger.info("Replication %d/%d done", r + 1, replications)
    else:
        with futures.ProcessPoolExecutor(max_workers=n_jobs) as pool:
            pending = {pool.submit(worker, r): r for r in range(replications)}
            for done, future in enumerate(futures.as_completed(pending), start=1):
                results[pending[future]] = future.result()
                logger.info("Replication %d/%d done", done, replications)
    return [results[r] for r in range(replications)]


def _flatten(per_replication: list[list[Row]]) -> list[Row]:
    return [row for rows in per_replication for row in rows]


def _distortion_replication(config: StudyConfig, replication: int) -> list[Row]:
    sample = dgp.generate(config.dgp_config(replication))
    rows: list[Row] = []
    for spec in config.scenarios:
        data = LabeledScores(scores=dgp.distort(sample, spec), labels=sample.d, true_p=sample.p_true)
        for method, scored in ((TRUE_PROB, data.with_scores(sample.p_true)), (BASELINE, data)):
            cell = f"{replication}/{spec.label}/{method}"
            values = _guarded(cell, config.metrics, _evaluate, scored, config.metrics, config)
            rows.extend(
                (replication, spec.label, method, "full", name, values[name], float("nan")) for name in config.metrics
            )
    return rows


def run_distortion_study(config: StudyConfig) -> pd.DataFrame:
    """Score the true probabilities and the distorted scores of each scenario on the whole sample.

    Returns:
        a study table with methods `true_prob` and `uncalibrated`, split `full` and no delta
    """
    logger.info("Distortion study: %d replications of %d scenarios", config.replications, len(config.scenarios))
    worker = functools.partial(_distortion_replication, config)
    return study_table(_flatten(_run_replications(worker, config.replications, config.n_jobs)))


def _recalibration_rows(
    replication: int,
    scenario: str,
    halves: dict[SplitName, LabeledScores],
    config: _StudyBase,
    names: Sequence[MetricName],
) -> list[Row]:
    """Fit every method on the calibration half, score both halves and compute deltas to the raw scores."""
    baseline = {
        split: _guarded(f"{replication}/{scenario}/{BASELINE}/{split}", names, _evaluate, data, names, config)
        for split, data in halves.items()
    }
    rows: list[Row] = [
        (replication, scenario, BASELINE, split, name, values[name], 0.0 if np.isfinite(values[name]) else np.nan)
        for split, values in baseline.items()
        for name in names
    ]
    for method in config.methods:
        try:
            recalibrator: Optional[Recalibrator] = fit_recalibrator(
                method, halves["calibration"], config.locreg_config()
            )
        except _CELL_ERRORS as e:
            logger.warning("Fitting %s failed in %d/%s, recorded as NaN: %s", method, replication, scenario, e)
            recalibrator = None
        for split, data in halves.items():
            cell = f"{replication}/{scenario}/{method}/{split}"
            if recalibrator is None:
                values = {name: float("nan") for name in names}
            else:
                values = _guarded(cell, names, _evaluate_recalibrated, recalibrator, data, names, config)
            rows.extend(
                (replication, scenario, method, split, name, values[name], values[name] - baseline[split][name])
                for name in names
            )
    return rows


def _recalibration_replication(config: StudyConfig, replication: int) -> list[Row]:
    sample = dgp.generate(config.dgp_config(replication))
    calibration, test = partition(
        config.n, (config.calibration_fraction, 1.0 - config.calibration_fraction), seed=config.seed + replication
    )
    rows: list[Row] = []
    for spec in config.scenarios:
        data = LabeledScores(scores=dgp.distort(sample, spec), labels=sample.d, true_p=sample.p_true)
        halves: dict[SplitName, LabeledScores] = {"calibration": data.take(calibration), "test": data.take(test)}
        rows.extend(_recalibration_rows(replication, spec.label, halves, config, config.metrics))
    return rows


def run_recalibration_study(config: StudyConfig) -> pd.DataFrame:
    """Recalibrate the distorted scores of each scenario and measure the change of every metric.

    Each sample is split into a calibration and a test set; recalibrators are fitted on the calibration set and
    every metric is computed on both sets, for the raw scores (`uncalibrated`) and for each method.
    """
    logger.info(
        "Recalibration study: %d replications, %d scenarios, methods %s",
        config.replications,
        len(config.scenarios),
        ", ".join(config.methods),
    )
    worker = functools.partial(_recalibration_replication, config)
    return study_table(_flatten(_run_replications(worker, config.replications, config.n_jobs)))


def _curve_replication(config: StudyConfig, grid: FloatArray, replication: int) -> list[tuple[FloatArray, FloatArray]]:
    """Smoothed curve on `grid` and raw scores of each scenario."""
    sample = dgp.generate(config.dgp_config(replication))
    estimate = curve_on_grid(config.locreg_config(), grid)
    curves = []
    for spec in config.scenarios:
        data = LabeledScores(scores=dgp.distort(sample, spec), labels=sample.d)
        curves.append((estimate(data), data.scores))
    return curves


def run_curve_study(config: StudyConfig, level: float = 0.95) -> CurveStudy:
    """Average the smoothed calibration curve of each scenario over replications, on a fixed grid over [0, 1].

    The band is a percentile bootstrap of the mean curve, resampling replications with `config.n_boot` draws.
    """
    grid = np.linspace(0.0, 1.0, config.grid_size)
    worker = functools.partial(_curve_replication, config, grid)
    per_replication = _run_replications(worker, config.replications, config.n_jobs)
    rng = np.random.default_rng(config.seed)
    edges = np.linspace(0.0, 1.0, HISTOGRAM_BINS + 1)
    curve_frames, histogram_frames = [], []
    for s, spec in enumerate(config.scenarios):
        curves = np.array([replication[s][0] for replication in per_replication])
        means = np.array(
            [curves[rng.integers(0, len(curves), size=len(curves))].mean(axis=0) for _ in range(config.n_boot)]
        )
        low, high = percentile_band(means, level)
        curve_frames.append(
            pd.DataFrame({"scenario": spec.label, "grid": grid, "estimate": curves.mean(axis=0), "lo": low, "hi": high})
        )
        counts, _ = np.histogram(np.concatenate([replication[s][1] for replication in per_replication]), bins=edges)
        histogram_frames.append(
            pd.DataFrame({"scenario": spec.label, "bin_low": edges[:-1], "bin_high": edges[1:], "count": counts})
        )
    return CurveStudy(
        curves=pd.concat(curve_frames, ignore_index=True), histograms=pd.concat(histogram_frames, ignore_index=True)
    )


def summarize(table: pd.DataFrame) -> pd.DataFrame:
    """Mean, median and 2.5%/97.5% quantiles of values and deltas per scenario, method, split and metric.

    NaN cells are left out of the statistics and counted in `n_failed`.
    """
    keys = ["scenario", "method", "split", "metric"]
    grouped = table.groupby(keys, sort=False)
    summary = grouped["value"].agg(
        n="count",
        mean="mean",
        median="median",
        q025=lambda v: v.quantile(0.025),
        q975=lambda v: v.quantile(0.975),
    )
    summary["n_failed"] = grouped["value"].size() - summary["n"]
    summary["mean_delta"] = grouped["delta"].mean()
    summary["median_delta"] = grouped["delta"].median()
    return summary.reset_index()


def _trace_rows(
    split_index: int,
    kind: str,
    grid: forest.GridResult,
    holdout_scores: list[FloatArray],
    holdout_labels: Any,
    test: Any,
    config: RfStudyConfig,
) -> list[tuple[Any, ...]]:
    rows = []
    for entry, scores in zip(grid.entries, holdout_scores):
        data = LabeledScores(scores=scores[test], labels=holdout_labels[test])
        values = _guarded(f"{split_index}/{kind}/trace", TRACE_METRICS, _evaluate, data, TRACE_METRICS, config)
        cfg = entry.config
        rows.append(
            (split_index, kind, cfg.ntree, cfg.mtry, cfg.nodesize, entry.oob.criterion, values["auc"], values["lcs"])
        )
    return rows


def run_rf_study(
    dataset: TabularDataset,
    config: RfStudyConfig,
    grids: Optional[dict[ForestKind, list[forest.ForestConfig]]] = None,
) -> RfStudy:
    """Compare the calibration of classification and regression forests, before and after recalibration.

    Args:
        dataset: tabular data with a binary label
        config: study settings
        grids: hyperparameter grid of each forest kind; `forest.desk_grid` by default

    Returns:
        the study table (replication = split index, scenario = forest kind), the grid trace and the grid searches
    """
    parts = split_rows(dataset.n_rows, config.fractions, seed=config.seed)
    train_set = dataset.take(parts.train)
    if config.smote:
        train_set = smote(train_set, rate_percent=config.smote_rate, k=config.smote_k, seed=config.seed)
    holdout_rows = np.sort(np.concatenate([parts.calibration, parts.test]))
    holdout = dataset.take(holdout_rows)
    calibration_share = config.fractions[1] / (config.fractions[1] + config.fractions[2])

    searches: dict[str, forest.GridResult] = {}
    holdout_scores: dict[str, list[FloatArray]] = {}
    for kind in config.kinds:
        grid = (grids or {}).get(kind) or forest.desk_grid(
            kind, config.seed, dataset.n_features, full_scale=config.full_scale
        )
        search = forest.grid_search(train_set, grid, keep_forests=True)
        logger.info("Best %s: %s", kind, search.best)
        searches[kind] = search
        holdout_scores[kind] = [
            forest.predict_score(entry.forest, holdout.features) for entry in search.entries if entry.forest is not None
        ]

    rows: list[Row] = []
    trace: list[tuple[Any, ...]] = []
    for s in range(config.splits):
        shares = (calibration_share, 1.0 - calibration_share)
        calibration, test = partition(holdout.n_rows, shares, seed=config.seed + s)
        for kind in config.kinds:
            scores = holdout_scores[kind][searches[kind].best_index]
            data = LabeledScores(scores=scores, labels=holdout.labels)
            halves: dict[SplitName, LabeledScores] = {"calibration": data.take(calibration), "test": data.take(test)}
            rows.extend(_recalibration_rows(s, kind, halves, config, config.metrics))
            trace.extend(_trace_rows(s, kind, searches[kind], holdout_scores[kind], holdout.labels, test, config))
        logger.info("Split %d/%d done", s + 1, config.splits)
    return RfStudy(table=study_table(rows), trace=pd.DataFrame(trace, columns=list(TRACE_COLUMNS)), grids=searches)
