"""Reading and writing the delimited files and JSON documents exchanged by the command line.

Score files have a header row and the columns `score`, `label` and optionally `true_p`; the columns written by
`lcsuite simulate` (`p_u`, `d` and `p_true`) are accepted as well. Floats are written with their shortest
round-tripping representation.
"""

import logging
import os
from collections.abc import Mapping
from pathlib import Path
from typing import IO, Any, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel
from pydantic_core import to_json
from pydantic_settings import BaseSettings, DotEnvSettingsSource, SettingsConfigDict

from lcsuite.dgp import SyntheticSample
from lcsuite.errors import DataFormatError, InvalidInputError
from lcsuite.forest import GridResult
from lcsuite.metrics import LabeledScores
from lcsuite.types import FloatArray
from lcsuite.utils import parse_cell

logger = logging.getLogger(__name__)

PathOrBuffer = Union[str, Path, IO[str]]

SCORE_ALIASES = {
    "score": ("score", "p_u"),
    "label": ("label", "d"),
    "true_p": ("true_p", "p_true"),
}
SAMPLE_COLUMNS = ("x1", "x2", "x3", "x4", "eta", "p_true", "p_u", "d")
GRID_COLUMNS = ("ntree", "mtry", "nodesize", "criterion")
NA_REP = "NaN"


def _pick_column(frame: pd.DataFrame, role: str, path: Any, required: bool) -> Optional[str]:
    for name in SCORE_ALIASES[role]:
        if name in frame.columns:
            return name
    if required:
        raise DataFormatError(f"{path}: no `{role}` column (expected one of {', '.join(SCORE_ALIASES[role])})")
    return None


def _numeric_column(frame: pd.DataFrame, column: str, path: Any) -> FloatArray:
    values = frame[column].map(parse_cell).to_numpy(dtype=np.float64)
    invalid = np.isnan(values)
    if invalid.any():
        row = int(np.flatnonzero(invalid)[0])
        raise DataFormatError(f"{path}: row {row + 2}: non-numeric value {frame[column].iat[row]!r} in `{column}`")
    return values


def read_scores(path: PathOrBuffer) -> LabeledScores:
    """Read a score file.

    Raises:
        DataFormatError: if a column is missing or a value can't be parsed, naming the row (the header is row 1)
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataFormatError(f"{path}: {e}") from e
    score_column = _pick_column(frame, "score", path, required=True)
    label_column = _pick_column(frame, "label", path, required=True)
    true_column = _pick_column(frame, "true_p", path, required=False)
    assert score_column is not None and label_column is not None
    try:
        return LabeledScores(
            scores=_numeric_column(frame, score_column, path),
            labels=_numeric_column(frame, label_column, path),
            true_p=_numeric_column(frame, true_column, path) if true_column else None,
        )
    except DataFormatError:
        raise
    except InvalidInputError as e:
        raise DataFormatError(f"{path}: {e}") from e


def write_scores(data: LabeledScores, path: PathOrBuffer) -> None:
    columns: dict[str, Any] = {"score": data.scores, "label": data.labels}
    if data.true_p is not None:
        columns["true_p"] = data.true_p
    pd.DataFrame(columns).to_csv(path, index=False)


def write_samples(sample: SyntheticSample, scores: FloatArray, path: PathOrBuffer) -> None:
    """Write a synthetic sample with its distorted scores: `x1,x2,x3,x4,eta,p_true,p_u,d`."""
    frame = pd.DataFrame(sample.x, columns=list(SAMPLE_COLUMNS[:4]))
    frame["eta"] = sample.eta
    frame["p_true"] = sample.p_true
    frame["p_u"] = scores
    frame["d"] = sample.d
    frame.to_csv(path, index=False)


def write_metrics(metrics: Mapping[str, float], path: PathOrBuffer) -> None:
    """Write `metric,value` rows, in the order of `metrics`."""
    write_frame(pd.DataFrame({"metric": list(metrics), "value": list(metrics.values())}), path)


def write_curve(
    grid: FloatArray,
    estimate: FloatArray,
    path: PathOrBuffer,
    band: Optional[tuple[FloatArray, FloatArray]] = None,
) -> None:
    """Write a calibration curve, `grid,estimate`, with `lo,hi` columns when a band is given."""
    columns: dict[str, Any] = {"grid": grid, "estimate": estimate}
    if band is not None:
        columns["lo"], columns["hi"] = band
    pd.DataFrame(columns).to_csv(path, index=False)


def write_recalibrated(data: LabeledScores, recalibrated: FloatArray, path: PathOrBuffer) -> None:
    """Write `score,recalibrated,label` rows."""
    pd.DataFrame({"score": data.scores, "recalibrated": recalibrated, "label": data.labels}).to_csv(path, index=False)


def grid_frame(result: GridResult) -> pd.DataFrame:
    """One `ntree,mtry,nodesize,criterion` row per configuration of a grid search, in grid order."""
    return pd.DataFrame(
        [(e.config.ntree, e.config.mtry, e.config.nodesize, e.oob.criterion) for e in result.entries],
        columns=list(GRID_COLUMNS),
    )


def write_grid(result: GridResult, path: PathOrBuffer) -> None:
    write_frame(grid_frame(result), path)


def write_frame(frame: pd.DataFrame, path: PathOrBuffer) -> None:
    """Write a table without its index; undefined values are written as `NaN`."""
    frame.to_csv(path, index=False, na_rep=NA_REP)


def write_json(document: Any, path: Union[str, Path]) -> None:
    """Write a JSON document (pydantic models and numpy scalars are supported), indented, with a final newline."""
    Path(path).write_bytes(to_json(_to_builtin(document), indent=2) + b"\n")


def _to_builtin(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, Mapping):
        return {key: _to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(item) for item in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, os.PathLike):
        return os.fspath(value)
    return value


def sidecar_path(output: Union[str, Path]) -> Path:
    """Path of the effective-configuration file written next to `output`.

    >>> sidecar_path("runs/s.csv").as_posix()
    'runs/s.csv.config.json'

    """
    output = Path(output)
    return output.with_name(output.name + ".config.json")


class _SettingsFile(BaseSettings):
    """Field-less settings: every key of the file is kept as a raw string, validated later by the target model."""

    model_config = SettingsConfigDict(extra="allow", case_sensitive=False)


def read_settings_file(path: Union[str, Path]) -> dict[str, str]:
    """Read a study configuration file of `key = value` lines, in dotenv syntax.

    `#` starts a comment, values may be quoted, and dashes in keys are read as underscores. Keys are returned in
    lower case; lines with an empty value are skipped.
    """
    source = DotEnvSettingsSource(_SettingsFile, env_file=Path(path), env_file_encoding="utf-8", case_sensitive=False)
    values = {str(key).replace("-", "_"): str(value) for key, value in source().items()}
    logger.debug("Read %d settings from %s", len(values), path)
    return values
