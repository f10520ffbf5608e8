"""Self-contained SVG figures of study results.

Figures are `width` x `height` pixels at 100 dpi (800 x 600 by default) and byte-reproducible: the SVG id salt is
fixed and no date is embedded.
"""

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Optional, Union

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.axes import Axes
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from lcsuite.errors import InvalidInputError
from lcsuite.types import FloatArray

logger = logging.getLogger(__name__)

DEFAULT_WIDTH = 800
DEFAULT_HEIGHT = 600
DPI = 100
SVG_SALT = "lcsuite"
TICKS = np.linspace(0, 1, 11, endpoint=True)


def _figure(width: int, height: int) -> Figure:
    if width <= 0 or height <= 0:
        raise InvalidInputError(f"figure size must be positive, got {width}x{height}")
    figure = Figure(figsize=(width / DPI, height / DPI), dpi=DPI)
    FigureCanvasSVG(figure)
    return figure


def _save(figure: Figure, path: Union[str, Path]) -> None:
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path"}):
        figure.savefig(path, format="svg", metadata={"Date": None})
    logger.info("Wrote %s", path)


def _unit_axes(ax: Axes) -> None:
    ax.plot([0, 1], [0, 1], "k:", linewidth=1)
    ax.set_xticks(TICKS)
    ax.set_yticks(TICKS)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.grid(True)


def metric_boxplot(
    table: pd.DataFrame,
    metric: str,
    path: Union[str, Path],
    split: str = "test",
    column: str = "value",
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
) -> None:
    """Boxplot of a metric over replications, one box per scenario and method.

    Args:
        table: study table
        metric: metric to plot
        path: output SVG file
        split: split to keep
        column: `value` or `delta`
        width: width in pixels
        height: height in pixels
    """
    rows = table[(table["metric"] == metric) & (table["split"] == split)]
    if rows.empty:
        raise InvalidInputError(f"no `{metric}` rows on split `{split}`")
    grouped = rows.groupby(["scenario", "method"], sort=False)
    groups = [(key, group[column].dropna().to_numpy()) for key, group in grouped]
    figure = _figure(width, height)
    ax = figure.add_subplot()
    positions = np.arange(1, len(groups) + 1)
    ax.boxplot([values for _, values in groups], positions=positions, widths=0.6, showfliers=True)
    ax.set_xticks(positions, labels=[f"{scenario}\n{method}" for (scenario, method), _ in groups], rotation=90)
    if column == "delta":
        ax.axhline(0.0, color="k", linestyle=":", linewidth=1)
    ax.set_ylabel(f"{metric} ({column})")
    ax.set_title(f"{metric}, {split} split")
    ax.grid(True, axis="y")
    figure.tight_layout()
    _save(figure, path)


def calibration_plot(
    grid: FloatArray,
    estimate: FloatArray,
    path: Union[str, Path],
    band: Optional[tuple[FloatArray, FloatArray]] = None,
    scores: Optional[FloatArray] = None,
    title: str = "",
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
) -> None:
    """Smoothed calibration curve against the bisector, with an optional band and a histogram of the scores."""
    figure = _figure(width, height)
    if scores is None:
        ax = figure.add_subplot()
    else:
        ax, histogram = figure.subplots(2, 1, sharex=True, gridspec_kw={"height_ratios": (3, 1)})
        histogram.hist(scores, bins=20, range=(0, 1), histtype="step", linewidth=2)
        histogram.set_xlabel("score")
        histogram.set_ylabel("count")
    _unit_axes(ax)
    if band is not None:
        ax.fill_between(grid, band[0], band[1], alpha=0.3, linewidth=0)
    ax.plot(grid, estimate)
    ax.set_ylabel("observed frequency")
    if scores is None:
        ax.set_xlabel("score")
    if title:
        ax.set_title(title)
    figure.tight_layout()
    _save(figure, path)


def curve_bands(
    curves: pd.DataFrame,
    path: Union[str, Path],
    scenarios: Optional[Sequence[str]] = None,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
) -> None:
    """Mean calibration curves of a curve study, one line and band per scenario."""
    figure = _figure(width, height)
    ax = figure.add_subplot()
    _unit_axes(ax)
    for scenario, group in curves.groupby("scenario", sort=False):
        if scenarios is not None and scenario not in scenarios:
            continue
        lines = ax.plot(group["grid"], group["estimate"], label=str(scenario))
        ax.fill_between(group["grid"], group["lo"], group["hi"], color=lines[0].get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("score")
    ax.set_ylabel("observed frequency")
    ax.legend(loc="upper left")
    figure.tight_layout()
    _save(figure, path)


def trace_plot(
    trace: pd.DataFrame, path: Union[str, Path], width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT
) -> None:
    """LCS against AUC of every grid configuration and split, one color per forest kind."""
    figure = _figure(width, height)
    ax = figure.add_subplot()
    for kind, group in trace.groupby("scenario", sort=False):
        ax.scatter(group["auc"], group["lcs"], s=12, alpha=0.6, label=str(kind))
    ax.set_xlabel("AUC")
    ax.set_ylabel("LCS")
    ax.grid(True)
    ax.legend()
    figure.tight_layout()
    _save(figure, path)
