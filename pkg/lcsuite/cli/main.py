"""The `lcsuite` command line.

Exit codes: 0 on success, 1 when the input or the options are invalid, 2 on any other failure. Errors are reported on
standard error as a single line, `error: <ExceptionName>: <reason>`. Every command writes the effective configuration
to a JSON sidecar file, `<output>.config.json` unless `--sidecar` is given.
"""

import logging
import sys
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar, get_args

import click
import pandas as pd
from pydantic import ValidationError

from lcsuite import __version__, forest, harness, io, plots
from lcsuite.cli.command import from_config
from lcsuite.cli.options import CommaSeparated, FractionRange, LiteralChoice
from lcsuite.data import load_table
from lcsuite.dgp import DgpConfig, DistortionKind, DistortionSpec, distort, generate
from lcsuite.errors import InvalidInputError, OutOfBagError
from lcsuite.locreg import LocRegConfig, smoothed_calibration_curve
from lcsuite.metrics import (
    DEFAULT_BINS,
    DEFAULT_THRESHOLD,
    LabeledScores,
    bootstrap_band,
    compute_metrics,
    curve_on_grid,
)
from lcsuite.recalib import fit_recalibrator
from lcsuite.types import METHODS, METRICS, ForestKind, MethodName, MetricName

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Any])

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
VALIDATION_EXIT_CODE = 1
RUNTIME_EXIT_CODE = 2
MAX_SEED = 2**64 - 1

_VALIDATION_ERRORS = (click.ClickException, click.Abort, ValidationError, InvalidInputError)


def exit_code(error: BaseException) -> int:
    return VALIDATION_EXIT_CODE if isinstance(error, _VALIDATION_ERRORS) else RUNTIME_EXIT_CODE


def describe_error(error: BaseException) -> str:
    """One-line description of an error.

    >>> describe_error(InvalidInputError("n must be positive"))
    'error: InvalidInputError: n must be positive'

    """
    if isinstance(error, ValidationError):
        reason = "; ".join(
            f"{'.'.join(str(part) for part in e['loc'])}: {e['msg']}" if e["loc"] else e["msg"] for e in error.errors()
        )
    elif isinstance(error, click.ClickException):
        reason = error.format_message()
    elif isinstance(error, click.Abort):
        reason = "aborted"
    else:
        reason = str(error) or repr(error)
    return f"error: {type(error).__name__}: {' '.join(reason.split())}"


class LcsuiteGroup(click.Group):
    """Command group reporting every error on one line, with exit code 1 for invalid input and 2 otherwise."""

    def main(  # type: ignore[override]
        self,
        args: Optional[Sequence[str]] = None,
        prog_name: Optional[str] = None,
        complete_var: Optional[str] = None,
        standalone_mode: bool = True,
        **extra: Any,
    ) -> int:
        try:
            result = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = result if isinstance(result, int) else 0
        except Exception as e:
            logger.debug("Command failed", exc_info=True)
            click.echo(describe_error(e), err=True)
            code = exit_code(e)
        if standalone_mode:
            sys.exit(code)
        return code


def input_option(*names: str, required: bool = True, help: str) -> Callable[[F], F]:
    return click.option(
        *names, type=click.Path(exists=True, dir_okay=False, path_type=Path), required=required, help=help
    )


def output_option(*names: str, required: bool = True, help: str) -> Callable[[F], F]:
    return click.option(*names, type=click.Path(dir_okay=False, path_type=Path), required=required, help=help)


def seed_option(required: bool = True) -> Callable[[F], F]:
    return click.option(
        "--seed", type=click.IntRange(0, MAX_SEED), required=required, help="seed of the random generator"
    )


def sidecar_option(f: F) -> F:
    return click.option(
        "--sidecar",
        type=click.Path(dir_okay=False, path_type=Path),
        default=None,
        help="effective configuration file [default: <output>.config.json]",
    )(f)


def figure_options(f: F) -> F:
    f = click.option(
        "--height", type=click.IntRange(min=1), default=plots.DEFAULT_HEIGHT, show_default=True, help="pixels"
    )(f)
    return click.option(
        "--width", type=click.IntRange(min=1), default=plots.DEFAULT_WIDTH, show_default=True, help="pixels"
    )(f)


def write_sidecar(sidecar: Optional[Path], output: Path, command: str, **settings: Any) -> None:
    """Write the effective configuration of a run next to its output."""
    document = {"command": command, "version": __version__, **settings}
    path = sidecar or io.sidecar_path(output)
    io.write_json(document, path)
    logger.info("Wrote the effective configuration to %s", path)


@click.group(cls=LcsuiteGroup)
@click.version_option(__version__, prog_name="lcsuite")
@click.option("-v", "--verbose", count=True, help="log INFO messages, DEBUG messages with -vv")
def cli(verbose: int) -> None:
    """Measure and repair the calibration of binary classifiers."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    logging.captureWarnings(True)


@cli.command()
@from_config("config", DgpConfig)
@click.option(
    "--alpha", type=FractionRange(min=0, min_open=True), default=None, help="raise the true probabilities to a power"
)
@click.option(
    "--gamma", type=FractionRange(min=0, min_open=True), default=None, help="scale the linear predictor"
)
@output_option("--out", "output", help="output CSV `x1,x2,x3,x4,eta,p_true,p_u,d`")
@sidecar_option
def simulate(
    config: DgpConfig, alpha: Optional[float], gamma: Optional[float], output: Path, sidecar: Optional[Path]
) -> None:
    """Draw a synthetic sample with known probabilities and distorted scores `p_u`."""
    if alpha is not None and gamma is not None:
        raise click.UsageError("--alpha and --gamma are mutually exclusive")
    if alpha is not None:
        spec = DistortionSpec(kind=DistortionKind.ALPHA, value=alpha)
    elif gamma is not None:
        spec = DistortionSpec(kind=DistortionKind.GAMMA, value=gamma)
    else:
        spec = DistortionSpec()
    sample = generate(config)
    io.write_samples(sample, distort(sample, spec), output)
    logger.info("Wrote %d observations to %s", len(sample), output)
    write_sidecar(sidecar, output, "simulate", config=config, distortion=spec)


@cli.command("metrics")
@from_config("locreg", LocRegConfig, exclude=("degree",))
@input_option("--in", "input_path", help="score CSV `score,label[,true_p]`")
@output_option("--out", "output", required=False, help="output CSV `metric,value` [default: standard output]")
@click.option(
    "--metric",
    "names",
    type=CommaSeparated(LiteralChoice(METRICS)),
    default=",".join(METRICS),
    show_default=True,
    help="metrics to compute",
)
@click.option("--n-bins", type=click.IntRange(min=1), default=DEFAULT_BINS, show_default=True, help="ECE bins")
@click.option(
    "--threshold",
    type=FractionRange(0, 1),
    default=DEFAULT_THRESHOLD,
    show_default=True,
    help="classification threshold",
)
@sidecar_option
def metrics_command(
    locreg: LocRegConfig,
    input_path: Path,
    output: Optional[Path],
    names: list[MetricName],
    n_bins: int,
    threshold: float,
    sidecar: Optional[Path],
) -> None:
    """Compute calibration and discrimination metrics of a score file."""
    data = io.read_scores(input_path)
    values = compute_metrics(data, names, n_bins=n_bins, threshold=threshold, locreg=locreg)
    io.write_metrics(values, output if output is not None else sys.stdout)
    write_sidecar(
        sidecar,
        output or input_path.with_name(f"{input_path.name}.metrics"),
        "metrics",
        input=input_path,
        metrics=names,
        n_bins=n_bins,
        threshold=threshold,
        locreg=locreg,
    )


@cli.command("curve")
@from_config("locreg", LocRegConfig, exclude=("degree",))
@input_option("--in", "input_path", help="score CSV `score,label[,true_p]`")
@output_option("--out", "output", help="output CSV `grid,estimate[,lo,hi]`")
@click.option(
    "--bootstrap", type=click.IntRange(min=0), default=0, show_default=True, help="bootstrap resamples of the band"
)
@click.option(
    "--level", type=FractionRange(0, 1, min_open=True, max_open=True), default=0.95, show_default=True
)
@seed_option(required=False)
@output_option("--svg", required=False, help="also plot the curve to this SVG file")
@figure_options
@sidecar_option
def curve(
    locreg: LocRegConfig,
    input_path: Path,
    output: Path,
    bootstrap: int,
    level: float,
    seed: Optional[int],
    svg: Optional[Path],
    width: int,
    height: int,
    sidecar: Optional[Path],
) -> None:
    """Estimate the smoothed calibration curve of a score file, optionally with a bootstrap band."""
    if bootstrap > 0 and seed is None:
        raise click.UsageError("--seed is required with --bootstrap")
    data = io.read_scores(input_path)
    fit = smoothed_calibration_curve(data.scores, data.labels, locreg)
    band = None
    if bootstrap > 0:
        assert seed is not None
        band = bootstrap_band(data, curve_on_grid(locreg, fit.eval_points), n_boot=bootstrap, level=level, seed=seed)
    io.write_curve(fit.eval_points, fit.eval_values, output, band=band)
    if svg is not None:
        plots.calibration_plot(
            fit.eval_points, fit.eval_values, svg, band=band, scores=data.scores, width=width, height=height
        )
    write_sidecar(
        sidecar, output, "curve", input=input_path, locreg=locreg, bootstrap=bootstrap, level=level, seed=seed
    )


@cli.command()
@from_config("locreg", LocRegConfig, exclude=("degree",))
@click.option("--method", type=LiteralChoice(METHODS), required=True, help="recalibration method")
@input_option("--calibration", "calibration_path", help="score CSV the recalibrator is fitted on")
@input_option("--test", "test_path", required=False, help="score CSV to recalibrate [default: the calibration set]")
@output_option("--out", "output", help="output CSV `score,recalibrated,label`")
@output_option("--params-out", "params_path", required=False, help="output JSON of the fitted parameters")
@sidecar_option
def recalibrate(
    locreg: LocRegConfig,
    method: MethodName,
    calibration_path: Path,
    test_path: Optional[Path],
    output: Path,
    params_path: Optional[Path],
    sidecar: Optional[Path],
) -> None:
    """Fit a recalibration map on a calibration set and apply it to a test set."""
    calibration = io.read_scores(calibration_path)
    recalibrator = fit_recalibrator(method, calibration, locreg)
    target = io.read_scores(test_path) if test_path is not None else calibration
    io.write_recalibrated(target, recalibrator.apply(target.scores), output)
    if params_path is not None:
        io.write_json(recalibrator.params(), params_path)
    write_sidecar(
        sidecar,
        output,
        "recalibrate",
        method=method,
        calibration=calibration_path,
        test=test_path,
        locreg=locreg,
        params=recalibrator.params(),
    )


@cli.group()
def rf() -> None:
    """Random forests on tabular data with a binary label."""


@rf.command("train")
@from_config("config", forest.ForestConfig)
@input_option("--in", "input_path", help="training CSV: a label column, every other column is a feature")
@click.option("--label-column", default="label", show_default=True, help="name of the label column")
@input_option("--predict", "predict_path", required=False, help="CSV of the rows to score [default: training rows]")
@output_option("--out", "output", help="output CSV `score,label`")
@sidecar_option
def rf_train(
    config: forest.ForestConfig,
    input_path: Path,
    label_column: str,
    predict_path: Optional[Path],
    output: Path,
    sidecar: Optional[Path],
) -> None:
    """Train a forest and score rows with it."""
    dataset = load_table(input_path, label_column=label_column)
    trained = forest.train(dataset, config)
    oob: Optional[dict[str, Any]] = None
    try:
        oob = forest.oob_criterion(trained, dataset)._asdict()
        logger.info("Out-of-bag criterion: %s", oob)
    except OutOfBagError as e:
        logger.warning("%s", e)
    target = load_table(predict_path, label_column=label_column) if predict_path is not None else dataset
    scores = forest.predict_score(trained, target.features)
    io.write_scores(LabeledScores(scores=scores, labels=target.labels), output)
    write_sidecar(sidecar, output, "rf train", config=config, input=input_path, predict=predict_path, oob=oob)


@rf.command("grid")
@input_option("--in", "input_path", help="training CSV: a label column, every other column is a feature")
@click.option("--label-column", default="label", show_default=True, help="name of the label column")
@click.option("--kind", type=LiteralChoice(get_args(ForestKind)), default="regressor", show_default=True)
@seed_option()
@click.option("--ntree", "ntrees", type=CommaSeparated(click.IntRange(min=1)), default=None, help="ntree values")
@click.option("--mtry", "mtries", type=CommaSeparated(click.IntRange(min=1)), default=None, help="mtry values")
@click.option(
    "--nodesize", "nodesizes", type=CommaSeparated(click.IntRange(min=1)), default=None, help="nodesize values"
)
@click.option("--full-scale", is_flag=True, help="default to the full grid instead of the desk-scale grid")
@output_option("--out", "output", help="output CSV `ntree,mtry,nodesize,criterion`")
@sidecar_option
def rf_grid(
    input_path: Path,
    label_column: str,
    kind: ForestKind,
    seed: int,
    ntrees: Optional[list[int]],
    mtries: Optional[list[int]],
    nodesizes: Optional[list[int]],
    full_scale: bool,
    output: Path,
    sidecar: Optional[Path],
) -> None:
    """Select forest hyperparameters by out-of-bag error."""
    dataset = load_table(input_path, label_column=label_column)
    default_ntrees, default_mtries, default_nodesizes = forest.FULL_GRID if full_scale else forest.DESK_GRID
    grid = forest.product_grid(
        kind,
        seed,
        dataset.n_features,
        ntrees or default_ntrees,
        mtries or default_mtries,
        nodesizes or default_nodesizes,
    )
    result = forest.grid_search(dataset, grid)
    io.write_grid(result, output)
    best = result.best
    click.echo(f"best: ntree={best.ntree} mtry={best.mtry} nodesize={best.nodesize}")
    write_sidecar(
        sidecar,
        output,
        "rf grid",
        input=input_path,
        kind=kind,
        seed=seed,
        grid=[c.sort_key for c in grid],
        best=best,
    )


@cli.group()
def study() -> None:
    """Replication studies; each writes `study.csv`, `summary.csv` and SVG figures to an output directory."""


def _full_scale_presets(kwargs: Mapping[str, Any]) -> dict[str, Any]:
    return {"replications": harness.FULL_SCALE_REPLICATIONS} if kwargs.get("full_scale") else {}


def _study_outputs(f: F) -> F:
    f = sidecar_option(f)
    f = figure_options(f)
    f = click.option("--plots/--no-plots", "make_plots", default=True, show_default=True, help="write SVG figures")(f)
    return click.option(
        "--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True, help="output directory"
    )(f)


def _synthetic_study(name: str, exclude: Sequence[str]) -> Callable[[Callable[..., Any]], click.Command]:
    def decorator(f: Callable[..., Any]) -> click.Command:
        f = _study_outputs(f)
        f = click.option(
            "--full-scale",
            is_flag=True,
            help=f"run {harness.FULL_SCALE_REPLICATIONS} replications unless `replications` is set",
        )(f)
        f = from_config(
            "config", harness.StudyConfig, exclude=exclude, config_file=True, presets=_full_scale_presets
        )(f)
        return study.command(name)(f)

    return decorator


def _write_study(table: pd.DataFrame, out_dir: Path) -> None:
    io.write_frame(table, out_dir / "study.csv")
    io.write_frame(harness.summarize(table), out_dir / "summary.csv")
    logger.info("Wrote %d rows to %s", len(table), out_dir / "study.csv")


@_synthetic_study("distortion", exclude=("methods", "calibration_fraction", "n_boot"))
def study_distortion(
    config: harness.StudyConfig,
    full_scale: bool,
    out_dir: Path,
    make_plots: bool,
    width: int,
    height: int,
    sidecar: Optional[Path],
) -> None:
    """Metrics of the true probabilities and of the distorted scores, per scenario."""
    out_dir.mkdir(parents=True, exist_ok=True)
    table = harness.run_distortion_study(config)
    _write_study(table, out_dir)
    if make_plots:
        for metric in config.metrics:
            plots.metric_boxplot(table, metric, out_dir / f"{metric}.svg", split="full", width=width, height=height)
    write_sidecar(sidecar, out_dir / "study.csv", "study distortion", config=config)


@_synthetic_study("recalibration", exclude=("n_boot",))
def study_recalibration(
    config: harness.StudyConfig,
    full_scale: bool,
    out_dir: Path,
    make_plots: bool,
    width: int,
    height: int,
    sidecar: Optional[Path],
) -> None:
    """Metrics before and after recalibration, on the calibration and the test halves of each sample."""
    out_dir.mkdir(parents=True, exist_ok=True)
    table = harness.run_recalibration_study(config)
    _write_study(table, out_dir)
    if make_plots:
        for metric in config.metrics:
            plots.metric_boxplot(
                table, metric, out_dir / f"delta_{metric}.svg", split="test", column="delta", width=width, height=height
            )
    write_sidecar(sidecar, out_dir / "study.csv", "study recalibration", config=config)


@_synthetic_study("curves", exclude=("methods", "metrics", "calibration_fraction", "n_bins", "threshold"))
def study_curves(
    config: harness.StudyConfig,
    full_scale: bool,
    out_dir: Path,
    make_plots: bool,
    width: int,
    height: int,
    sidecar: Optional[Path],
) -> None:
    """Mean smoothed calibration curve of each scenario, with a 95% band, and histograms of the scores."""
    out_dir.mkdir(parents=True, exist_ok=True)
    result = harness.run_curve_study(config)
    io.write_frame(result.curves, out_dir / "curves.csv")
    io.write_frame(result.histograms, out_dir / "histograms.csv")
    if make_plots:
        plots.curve_bands(result.curves, out_dir / "curves.svg", width=width, height=height)
    write_sidecar(sidecar, out_dir / "curves.csv", "study curves", config=config)


@study.command("rf")
@from_config("config", harness.RfStudyConfig, config_file=True)
@input_option("--in", "input_path", help="tabular CSV: a label column, every other column is a feature")
@click.option("--label-column", default="label", show_default=True, help="name of the label column")
@_study_outputs
def study_rf(
    config: harness.RfStudyConfig,
    input_path: Path,
    label_column: str,
    out_dir: Path,
    make_plots: bool,
    width: int,
    height: int,
    sidecar: Optional[Path],
) -> None:
    """Classification against regression forests, before and after recalibration."""
    dataset = load_table(input_path, label_column=label_column)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = harness.run_rf_study(dataset, config)
    _write_study(result.table, out_dir)
    io.write_frame(result.trace, out_dir / "trace.csv")
    for kind, search in result.grids.items():
        io.write_grid(search, out_dir / f"grid_{kind}.csv")
    if make_plots:
        for metric in config.metrics:
            plots.metric_boxplot(result.table, metric, out_dir / f"{metric}.svg", width=width, height=height)
        plots.trace_plot(result.trace, out_dir / "trace.svg", width=width, height=height)
    write_sidecar(
        sidecar,
        out_dir / "study.csv",
        "study rf",
        config=config,
        input=input_path,
        best={kind: search.best for kind, search in result.grids.items()},
    )


def run() -> None:
    cli()
