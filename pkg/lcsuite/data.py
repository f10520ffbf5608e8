"""Tabular datasets: loading, random partitions and SMOTE oversampling."""

import dataclasses
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Union

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from lcsuite.errors import DataFormatError, InvalidInputError
from lcsuite.types import FloatArray, IntArray
from lcsuite.utils import parse_cell

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.5, 0.25, 0.25)
_FRACTION_TOLERANCE = 1e-9


@dataclasses.dataclass(frozen=True)
class TabularDataset:
    """Numeric features and a binary label.

    Attributes:
        columns: names of the feature columns
        features: matrix of shape `(n_rows, len(columns))`
        labels: binary labels
        label_column: name of the label column
    """

    columns: tuple[str, ...]
    features: FloatArray
    labels: IntArray
    label_column: str = "label"

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2 or features.shape[1] != len(self.columns):
            raise InvalidInputError(f"expected a matrix with {len(self.columns)} columns, got shape {features.shape}")
        if features.shape[0] != len(labels):
            raise InvalidInputError(f"{features.shape[0]} feature rows but {len(labels)} labels")
        if not np.isfinite(features).all():
            raise InvalidInputError("features contain NaN or infinite values")
        if not np.isin(labels, (0, 1)).all():
            raise InvalidInputError("labels must be 0 or 1")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def take(self, indices: Any) -> "TabularDataset":
        """Select rows."""
        indices = np.asarray(indices, dtype=np.int64)
        return dataclasses.replace(self, features=self.features[indices], labels=self.labels[indices])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=list(self.columns))
        frame[self.label_column] = self.labels
        return frame


@dataclasses.dataclass(frozen=True)
class Split:
    """A partition of row indices into train, calibration and test sets."""

    train: IntArray
    calibration: IntArray
    test: IntArray
    fractions: tuple[float, float, float]
    seed: int


def load_table(path: Union[str, Path], label_column: str = "label") -> TabularDataset:
    """Read a comma-separated file with a header row; every column except `label_column` is a feature.

    Args:
        path: path to the file
        label_column: name of the binary label column

    Returns:
        the dataset

    Raises:
        DataFormatError: if the label column is missing, a cell isn't numeric or a label isn't 0/1. Row numbers in
            messages count lines of the file, the header being line 1.
    """
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise DataFormatError(f"{path}: file is empty") from e
    except pd.errors.ParserError as e:
        raise DataFormatError(f"{path}: {e}") from e
    if label_column not in raw.columns:
        raise DataFormatError(f"{path}: missing label column `{label_column}` (columns: {', '.join(raw.columns)})")
    numeric = raw.apply(lambda column: column.map(parse_cell))
    values = numeric.to_numpy(dtype=np.float64)
    for invalid, problem in ((np.isnan(values), "non-numeric"), (np.isinf(values), "infinite")):
        if invalid.any():
            row, col = np.argwhere(invalid)[0]
            raise DataFormatError(
                f"{path}: row {row + 2}: {problem} value {raw.iat[row, col]!r} in column `{raw.columns[col]}`"
            )
    labels = numeric[label_column].to_numpy(dtype=np.float64)
    not_binary = ~np.isin(labels, (0.0, 1.0))
    if not_binary.any():
        row = int(np.flatnonzero(not_binary)[0])
        raise DataFormatError(f"{path}: row {row + 2}: label must be 0 or 1, got {raw[label_column].iat[row]!r}")
    feature_columns = tuple(str(c) for c in raw.columns if c != label_column)
    dataset = TabularDataset(
        columns=feature_columns,
        features=numeric[list(feature_columns)].to_numpy(dtype=np.float64),
        labels=labels.astype(np.int64),
        label_column=label_column,
    )
    logger.info("Loaded %d rows and %d features from %s", dataset.n_rows, dataset.n_features, path)
    return dataset


def write_table(dataset: TabularDataset, path: Union[str, Path]) -> None:
    """Write a dataset in the format read by `load_table`; floats are written with their shortest exact repr."""
    dataset.to_frame().to_csv(path, index=False)


def allocate(n_rows: int, fractions: Sequence[float]) -> list[int]:
    """Split `n_rows` into integer sizes proportional to `fractions`, by largest remainder.

    >>> allocate(4, (0.5, 0.25, 0.25))
    [2, 1, 1]
    >>> allocate(5, (0.5, 0.5))
    [3, 2]

    """
    if not fractions or any(f <= 0 for f in fractions):
        raise InvalidInputError(f"fractions must be positive, got {list(fractions)}")
    if abs(sum(fractions) - 1.0) > _FRACTION_TOLERANCE:
        raise InvalidInputError(f"fractions must sum to 1, got {sum(fractions)}")
    exact = [f * n_rows for f in fractions]
    sizes = [int(np.floor(e)) for e in exact]
    remainders = sorted(range(len(fractions)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in remainders[: n_rows - sum(sizes)]:
        sizes[i] += 1
    return sizes


def partition(n_rows: int, fractions: Sequence[float], seed: int) -> list[IntArray]:
    """Uniform random partition of `range(n_rows)` into parts of sizes given by `allocate`."""
    sizes = allocate(n_rows, fractions)
    permutation = np.random.default_rng(seed).permutation(n_rows)
    return [np.sort(part) for part in np.split(permutation, np.cumsum(sizes)[:-1])]


def split(n_rows: int, fractions: Sequence[float] = DEFAULT_FRACTIONS, seed: int = 0) -> Split:
    """Partition rows into train, calibration and test sets.

    Args:
        n_rows: number of rows
        fractions: train, calibration and test fractions, positive and summing to 1
        seed: seed of the permutation

    Returns:
        the three disjoint sets of row indices, covering every row
    """
    if len(fractions) != 3:
        raise InvalidInputError(f"expected 3 fractions (train, calibration, test), got {len(fractions)}")
    train, calibration, test = partition(n_rows, fractions, seed)
    return Split(
        train=train,
        calibration=calibration,
        test=test,
        fractions=(float(fractions[0]), float(fractions[1]), float(fractions[2])),
        seed=seed,
    )


def minority_label(labels: IntArray) -> int:
    """The least frequent label; 1 on a tie."""
    positives = int(labels.sum())
    return 1 if positives <= len(labels) - positives else 0


def smote(dataset: TabularDataset, rate_percent: int = 200, k: int = 5, seed: int = 0) -> TabularDataset:
    """Oversample the minority class with SMOTE.

    Each minority row yields `rate_percent / 100` synthetic rows, each interpolated between the row and one of its
    `k` nearest minority neighbors (Euclidean), with an independent uniform fraction per feature. Synthetic rows are
    appended after the original rows, which are left untouched.

    Args:
        dataset: dataset to oversample
        rate_percent: oversampling rate, a positive multiple of 100
        k: number of nearest neighbors
        seed: seed of the random draws

    Returns:
        the dataset with synthetic minority rows appended
    """
    if rate_percent <= 0 or rate_percent % 100:
        raise InvalidInputError(f"rate_percent must be a positive multiple of 100, got {rate_percent}")
    if k < 1:
        raise InvalidInputError(f"k must be positive, got {k}")
    label = minority_label(dataset.labels)
    minority = dataset.features[dataset.labels == label]
    m = len(minority)
    if m < k + 1:
        raise InvalidInputError(f"SMOTE with k={k} needs at least {k + 1} minority rows, got {m}")

    _, neighbors = cKDTree(minority).query(minority, k=k + 1)
    neighbors = np.asarray(neighbors).reshape(m, k + 1)
    is_self = neighbors == np.arange(m)[:, None]
    # Drop the row itself, or the farthest candidate when duplicates pushed it out of the result
    dropped = np.where(is_self.any(axis=1), is_self.argmax(axis=1), k)
    keep = np.ones_like(neighbors, dtype=bool)
    keep[np.arange(m), dropped] = False
    neighbors = neighbors[keep].reshape(m, k)

    rng = np.random.default_rng(seed)
    per_row = rate_percent // 100
    parents = np.repeat(np.arange(m), per_row)
    chosen = neighbors[parents, rng.integers(0, k, size=len(parents))]
    gaps = rng.uniform(0.0, 1.0, size=(len(parents), dataset.n_features))
    synthetic = minority[parents] + gaps * (minority[chosen] - minority[parents])
    logger.info("SMOTE: %d minority rows, %d synthetic rows", m, len(synthetic))
    return dataclasses.replace(
        dataset,
        features=np.vstack([dataset.features, synthetic]),
        labels=np.concatenate([dataset.labels, np.full(len(synthetic), label, dtype=np.int64)]),
    )
