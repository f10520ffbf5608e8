import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from lcsuite import __version__
from lcsuite.cli import cli
from lcsuite.data import write_table

pytestmark = pytest.mark.usefixtures("reset_logging")


def invoke(*args):
    return CliRunner().invoke(cli, [str(arg) for arg in args])


@pytest.fixture
def scores_file(write_text):
    rows = "\n".join(f"{label}.0,{label}" for label in [0, 1] * 6)
    return write_text("scores.csv", f"score,label\n{rows}\n")


@pytest.fixture
def table_file(tmp_path, small_dataset):
    path = tmp_path / "data.csv"
    write_table(small_dataset, path)
    return path


def test_version():
    result = invoke("--version")
    assert result.exit_code == 0
    assert __version__ in result.output


def test_simulate(tmp_path):
    output = tmp_path / "s.csv"
    result = invoke("simulate", "--n", 2000, "--seed", 1, "--gamma", 3, "--out", output)
    assert result.exit_code == 0, result.output
    lines = output.read_text().splitlines()
    assert len(lines) == 2001
    assert lines[0] == "x1,x2,x3,x4,eta,p_true,p_u,d"
    sidecar = json.loads((tmp_path / "s.csv.config.json").read_text())
    assert sidecar["command"] == "simulate"
    assert sidecar["config"]["seed"] == 1
    assert sidecar["config"]["coefficients"] == [0.1, 0.05, 0.2, -0.05]
    assert sidecar["distortion"] == {"kind": "gamma", "value": 3.0}


def test_simulate_accepts_fractions(tmp_path):
    result = invoke("simulate", "--n", 10, "--seed", 0, "--alpha", "1/3", "--out", tmp_path / "s.csv")
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "s.csv")
    np.testing.assert_allclose(frame["p_u"], frame["p_true"] ** (1 / 3), rtol=1e-12)


def test_simulate_with_a_custom_sidecar(tmp_path):
    sidecar = tmp_path / "effective.json"
    result = invoke("simulate", "--n", 5, "--seed", 0, "--out", tmp_path / "s.csv", "--sidecar", sidecar)
    assert result.exit_code == 0
    assert json.loads(sidecar.read_text())["distortion"]["kind"] == "none"


@pytest.mark.parametrize(
    "args, message",
    [
        (["simulate", "--n", 10], "error: MissingParameter"),
        (["simulate", "--n", 0, "--seed", 0], "error: BadParameter"),
        (["simulate", "--seed", -1], "error: BadParameter"),
        (["simulate", "--seed", 0, "--alpha", 2, "--gamma", 2], "mutually exclusive"),
        (["simulate", "--seed", 0, "--coefficients", "1,2"], "expected 4 comma-separated values"),
        (["simulate", "--seed", 0, "--noise-sd", "1/0"], "not a valid number or fraction"),
        (["metrics", "--in", "missing.csv"], "does not exist"),
        (["unknown"], "error: UsageError"),
    ],
)
def test_invalid_options(tmp_path, args, message):
    result = invoke(*args, *(["--out", tmp_path / "out.csv"] if args[0] == "simulate" else []))
    assert result.exit_code == 1
    assert message in result.output
    assert len(result.output.strip().splitlines()) == 1


def test_output_into_a_missing_directory(tmp_path):
    result = invoke("simulate", "--n", 5, "--seed", 0, "--out", tmp_path / "missing" / "s.csv")
    assert result.exit_code == 2
    assert result.output.startswith("error: ")


def test_metrics_to_standard_output(scores_file):
    result = invoke("metrics", "--in", scores_file, "--metric", "brier,auc,accuracy")
    assert result.exit_code == 0, result.output
    assert result.output.splitlines() == ["metric,value", "brier,0.0", "auc,1.0", "accuracy,1.0"]
    sidecar = json.loads(scores_file.with_name("scores.csv.metrics.config.json").read_text())
    assert sidecar["metrics"] == ["brier", "auc", "accuracy"]


def test_metrics_of_a_simulated_sample(tmp_path):
    sample = tmp_path / "s.csv"
    assert invoke("simulate", "--n", 500, "--seed", 2, "--out", sample).exit_code == 0
    result = invoke("metrics", "--in", sample, "--out", tmp_path / "m.csv", "--neighbor-fraction", "1/2")
    assert result.exit_code == 0, result.output
    metrics = pd.read_csv(tmp_path / "m.csv").set_index("metric")["value"]
    assert list(metrics.index) == ["brier", "true_mse", "ece", "lcs", "accuracy", "sensitivity", "specificity", "auc"]
    assert metrics["true_mse"] == 0.0
    assert json.loads((tmp_path / "m.csv.config.json").read_text())["locreg"]["neighbor_fraction"] == 0.5


def test_metrics_of_an_invalid_file(write_text):
    path = write_text("bad.csv", "score,label\n0.1,0\nabc,1\n")
    result = invoke("metrics", "--in", path)
    assert result.exit_code == 1
    assert "error: DataFormatError" in result.output
    assert "row 3" in result.output


def test_metrics_of_single_class_labels(write_text):
    path = write_text("ones.csv", "score,label\n0.7,1\n0.2,1\n")
    result = invoke("metrics", "--in", path, "--metric", "sensitivity,specificity,auc")
    assert result.exit_code == 0, result.output
    assert result.output.splitlines()[1:] == ["sensitivity,0.5", "specificity,NaN", "auc,NaN"]


def test_recalibrate(tmp_path, write_text):
    calibration = write_text("cal.csv", "score,label\n0.1,0\n0.2,1\n0.3,0\n0.4,1\n")
    result = invoke(
        "recalibrate",
        "--method",
        "isotonic",
        "--calibration",
        calibration,
        "--out",
        tmp_path / "r.csv",
        "--params-out",
        tmp_path / "p.json",
    )
    assert result.exit_code == 0, result.output
    params = json.loads((tmp_path / "p.json").read_text())
    assert params == {"method": "isotonic", "knot_scores": [0.1, 0.2, 0.4], "knot_values": [0.0, 0.5, 1.0]}
    recalibrated = pd.read_csv(tmp_path / "r.csv")
    assert list(recalibrated.columns) == ["score", "recalibrated", "label"]
    assert recalibrated["recalibrated"].tolist() == [0.0, 0.5, 0.5, 1.0]


def test_recalibrate_a_test_set(tmp_path):
    sample = tmp_path / "s.csv"
    invoke("simulate", "--n", 600, "--seed", 3, "--gamma", 3, "--out", sample)
    result = invoke(
        "recalibrate", "--method", "local1", "--calibration", sample, "--test", sample, "--out", tmp_path / "r.csv"
    )
    assert result.exit_code == 0, result.output
    assert json.loads((tmp_path / "r.csv.config.json").read_text())["params"]["method"] == "local1"


def test_recalibrate_with_an_unknown_method(scores_file, tmp_path):
    result = invoke("recalibrate", "--method", "histogram", "--calibration", scores_file, "--out", tmp_path / "r.csv")
    assert result.exit_code == 1
    assert "error: BadParameter" in result.output


def test_curve(tmp_path):
    sample = tmp_path / "s.csv"
    invoke("simulate", "--n", 300, "--seed", 4, "--out", sample)
    output, svg = tmp_path / "c.csv", tmp_path / "c.svg"
    result = invoke("curve", "--in", sample, "--out", output, "--bootstrap", 20, "--seed", 0, "--svg", svg)
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(output)
    assert list(frame.columns) == ["grid", "estimate", "lo", "hi"]
    assert len(frame) == 101
    assert 'width="576pt"' in svg.read_text()


def test_curve_bootstrap_needs_a_seed(scores_file, tmp_path):
    result = invoke("curve", "--in", scores_file, "--out", tmp_path / "c.csv", "--bootstrap", 10)
    assert result.exit_code == 1
    assert "--seed is required" in result.output


def test_rf_train(table_file, tmp_path):
    result = invoke("rf", "train", "--in", table_file, "--seed", 0, "--ntree", 5, "--out", tmp_path / "s.csv")
    assert result.exit_code == 0, result.output
    scores = pd.read_csv(tmp_path / "s.csv")
    assert list(scores.columns) == ["score", "label"]
    assert len(scores) == 120
    assert scores["score"].between(0, 1).all()
    sidecar = json.loads((tmp_path / "s.csv.config.json").read_text())
    assert sidecar["config"]["ntree"] == 5
    assert sidecar["oob"]["n_evaluated"] > 0


def test_rf_train_rejects_a_large_mtry(table_file, tmp_path):
    result = invoke("rf", "train", "--in", table_file, "--seed", 0, "--mtry", 4, "--out", tmp_path / "s.csv")
    assert result.exit_code == 1
    assert "error: InvalidInputError: mtry=4" in result.output


def test_rf_grid(table_file, tmp_path):
    output = tmp_path / "g.csv"
    args = ["--ntree", 5, "--mtry", "1,2", "--nodesize", "5,10", "--out", output]
    result = invoke("rf", "grid", "--in", table_file, "--seed", 0, "--kind", "classifier", *args)
    assert result.exit_code == 0, result.output
    grid = pd.read_csv(output)
    assert len(grid) == 4
    best = grid.sort_values(["criterion", "ntree", "mtry", "nodesize"]).iloc[0]
    assert result.output.strip() == f"best: ntree=5 mtry={best['mtry']} nodesize={best['nodesize']}"


def test_verbose_logging(tmp_path):
    result = invoke("-v", "simulate", "--n", 10, "--seed", 0, "--out", tmp_path / "s.csv")
    assert result.exit_code == 0
    assert "INFO" in result.output
    assert "Wrote 10 observations" in result.output


def _study_files(out_dir):
    return {path.name: path.read_bytes() for path in sorted(out_dir.iterdir()) if path.suffix == ".csv"}


def test_distortion_study_is_reproducible(tmp_path):
    args = ["study", "distortion", "--seed", 0, "--n", 200, "--replications", 2, "--metrics", "lcs,auc"]
    first = invoke(*args, "--out-dir", tmp_path / "a")
    second = invoke(*args, "--out-dir", tmp_path / "b")
    assert first.exit_code == 0, first.output
    assert second.exit_code == 0
    assert _study_files(tmp_path / "a") == _study_files(tmp_path / "b")
    assert set(_study_files(tmp_path / "a")) == {"study.csv", "summary.csv"}
    assert (tmp_path / "a" / "lcs.svg").read_bytes() == (tmp_path / "b" / "lcs.svg").read_bytes()
    assert (tmp_path / "a" / "study.csv.config.json").exists()


def test_study_settings_file(tmp_path, write_text):
    settings = write_text("study.conf", "# quick run\nreplications = 2\nn = 200\nalphas = 1\ngammas = 3\n")
    base = ["study", "recalibration", "--seed", 0, "--config", settings, "--no-plots", "--methods", "platt"]
    result = invoke(*base, "--metrics", "lcs", "--out-dir", tmp_path / "a")
    assert result.exit_code == 0, result.output
    table = pd.read_csv(tmp_path / "a" / "study.csv")
    assert len(table) == 2 * 2 * 2 * 2
    assert set(table["scenario"]) == {"alpha=1", "gamma=3"}
    overridden = invoke(*base, "--metrics", "lcs", "--replications", 1, "--out-dir", tmp_path / "b")
    assert overridden.exit_code == 0
    assert len(pd.read_csv(tmp_path / "b" / "study.csv")) == 2 * 2 * 2
    sidecar = json.loads((tmp_path / "b" / "study.csv.config.json").read_text())
    assert sidecar["config"]["replications"] == 1
    assert sidecar["config"]["gammas"] == [3.0]


def test_study_settings_file_with_an_unknown_key(tmp_path, write_text):
    settings = write_text("study.conf", "replicates = 2\n")
    result = invoke("study", "distortion", "--seed", 0, "--config", settings, "--out-dir", tmp_path)
    assert result.exit_code == 1
    assert "error: ValidationError: replicates" in result.output


def test_curve_study(tmp_path):
    args = ["--seed", 1, "--n", 200, "--replications", 3, "--n-boot", 5, "--grid-size", 11, "--out-dir", tmp_path]
    result = invoke("study", "curves", *args)
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(tmp_path / "curves.csv")) == 6 * 11
    assert (tmp_path / "histograms.csv").exists()
    assert (tmp_path / "curves.svg").exists()


def test_rf_study(table_file, tmp_path):
    args = ["--seed", 0, "--splits", 1, "--methods", "platt", "--metrics", "auc,lcs", "--no-plots"]
    result = invoke("study", "rf", "--in", table_file, *args, "--out-dir", tmp_path / "rf")
    assert result.exit_code == 0, result.output
    names = {path.name for path in (tmp_path / "rf").iterdir()}
    expected = {"study.csv", "summary.csv", "trace.csv", "grid_classifier.csv", "grid_regressor.csv"}
    assert expected <= names
    sidecar = json.loads((tmp_path / "rf" / "study.csv.config.json").read_text())
    assert set(sidecar["best"]) == {"classifier", "regressor"}
