import numpy as np
import pandas as pd
import pytest

from lcsuite import plots
from lcsuite.errors import InvalidInputError


@pytest.fixture
def table() -> pd.DataFrame:
    rng = np.random.default_rng(0)
    rows = [
        {
            "replication": r,
            "scenario": scenario,
            "method": method,
            "split": "test",
            "metric": "lcs",
            "value": rng.uniform(0, 0.05),
            "delta": rng.normal(0, 0.01),
        }
        for r in range(5)
        for scenario in ("gamma=1/3", "gamma=3")
        for method in ("platt", "isotonic")
    ]
    return pd.DataFrame(rows)


def test_boxplot_size(tmp_path, table):
    path = tmp_path / "lcs.svg"
    plots.metric_boxplot(table, "lcs", path)
    text = path.read_text()
    assert text.startswith("<?xml")
    assert 'width="576pt"' in text
    assert 'height="432pt"' in text


def test_custom_size(tmp_path, table):
    path = tmp_path / "lcs.svg"
    plots.metric_boxplot(table, "lcs", path, column="delta", width=400, height=300)
    assert 'width="288pt"' in path.read_text()


def test_figures_are_reproducible(tmp_path, table):
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    plots.metric_boxplot(table, "lcs", first)
    plots.metric_boxplot(table, "lcs", second)
    assert first.read_bytes() == second.read_bytes()


def test_boxplot_needs_rows(tmp_path, table):
    with pytest.raises(InvalidInputError, match="no `auc` rows"):
        plots.metric_boxplot(table, "auc", tmp_path / "auc.svg")
    with pytest.raises(InvalidInputError, match="split `full`"):
        plots.metric_boxplot(table, "lcs", tmp_path / "lcs.svg", split="full")


def test_invalid_size(tmp_path, table):
    with pytest.raises(InvalidInputError, match="size"):
        plots.metric_boxplot(table, "lcs", tmp_path / "lcs.svg", width=0)


def test_calibration_plot_with_histogram(tmp_path):
    grid = np.linspace(0, 1, 11)
    path = tmp_path / "curve.svg"
    band = (np.clip(grid - 0.1, 0, 1), np.clip(grid + 0.1, 0, 1))
    plots.calibration_plot(grid, grid, path, band=band, scores=np.random.default_rng(1).uniform(size=100), title="x")
    assert "<svg" in path.read_text()


def test_curve_bands_and_trace(tmp_path):
    grid = np.linspace(0, 1, 5)
    curves = pd.concat(
        pd.DataFrame({"scenario": scenario, "grid": grid, "estimate": grid, "lo": grid - 0.1, "hi": grid + 0.1})
        for scenario in ("alpha=1", "gamma=3")
    )
    plots.curve_bands(curves, tmp_path / "curves.svg", scenarios=["gamma=3"])
    trace = pd.DataFrame({"scenario": ["classifier", "regressor"], "auc": [0.7, 0.8], "lcs": [0.02, 0.01]})
    plots.trace_plot(trace, tmp_path / "trace.svg")
    assert (tmp_path / "curves.svg").stat().st_size > 0
    assert (tmp_path / "trace.svg").stat().st_size > 0
