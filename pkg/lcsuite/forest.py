"""A small random forest for binary targets, with classification and regression score semantics.

Both kinds grow identical CART trees: for 0/1 labels the Gini impurity of a node is proportional to the
variance of its labels, so both criteria select the same splits. They differ in how trees are aggregated:

- a classification forest scores a row by the share of trees voting 1, a tree voting 1 when the mean label of
  the leaf is at least 0.5;
- a regression forest scores a row by the mean over trees of the leaf label means.
"""

import dataclasses
import logging
import warnings
from collections.abc import Sequence
from typing import Any, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt

from lcsuite.data import TabularDataset
from lcsuite.dgp import Seed
from lcsuite.errors import DegenerateTreeWarning, InvalidInputError, OutOfBagError
from lcsuite.types import BoolArray, FloatArray, ForestKind, IntArray

logger = logging.getLogger(__name__)

LEAF = -1
VOTE_THRESHOLD = 0.5
# (ntree, mtry, nodesize) values
GridAxes = tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]
DESK_GRID: GridAxes = ((50, 100), (2, 5), (5, 15))
FULL_GRID: GridAxes = ((100, 300, 500), tuple(range(1, 13)), (5, 10, 15, 20))


class ForestConfig(BaseModel):
    """Hyperparameters of a forest.

    Attributes:
        kind: `classifier` (majority votes) or `regressor` (leaf means)
        ntree: number of trees
        mtry: number of features drawn at each node; at most the number of features of the training data
        nodesize: minimum number of rows in a leaf
        seed: seed of the bootstrap resamples and feature draws
    """

    model_config = ConfigDict(frozen=True)

    kind: ForestKind = Field(default="regressor", description="score semantics of the forest")
    ntree: PositiveInt = Field(default=100, description="number of trees")
    mtry: PositiveInt = Field(default=2, description="features drawn at each node")
    nodesize: PositiveInt = Field(default=5, description="minimum leaf size")
    seed: Seed

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return (self.ntree, self.mtry, self.nodesize)


@dataclasses.dataclass(frozen=True)
class Tree:
    """A binary tree stored as parallel node arrays; node 0 is the root.

    Rows go to the left child when `x[feature] <= threshold`. Leaves have `feature == -1`; `value` holds the mean
    training label of every node, the prediction for leaves.
    """

    feature: IntArray
    threshold: FloatArray
    left: IntArray
    right: IntArray
    value: FloatArray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def apply(self, features: FloatArray) -> IntArray:
        """Index of the leaf reached by each row."""
        nodes = np.zeros(len(features), dtype=np.int64)
        active = self.feature[nodes] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            current = nodes[rows]
            goes_left = features[rows, self.feature[current]] <= self.threshold[current]
            nodes[rows] = np.where(goes_left, self.left[current], self.right[current])
            active[rows] = self.feature[nodes[rows]] != LEAF
        return nodes

    def predict(self, features: FloatArray) -> FloatArray:
        """Leaf mean of each row."""
        return self.value[self.apply(features)]


@dataclasses.dataclass(frozen=True)
class Forest:
    """A trained forest.

    Attributes:
        config: hyperparameters
        trees: the trees, in training order
        inbag_counts: number of times each training row was drawn for each tree, shape `(ntree, n_rows)`
        n_features: number of features seen at training
    """

    config: ForestConfig
    trees: tuple[Tree, ...]
    inbag_counts: IntArray
    n_features: int

    @property
    def kind(self) -> ForestKind:
        return self.config.kind

    @property
    def out_of_bag(self) -> BoolArray:
        """Mask of the training rows left out of each tree's resample."""
        return np.asarray(self.inbag_counts == 0)


class OobResult(NamedTuple):
    """Out-of-bag criterion with the number of rows it was computed on."""

    criterion: float
    n_evaluated: int
    n_skipped: int


@dataclasses.dataclass(frozen=True)
class GridEntry:
    config: ForestConfig
    oob: OobResult
    forest: Optional[Forest] = None


@dataclasses.dataclass(frozen=True)
class GridResult:
    """Out-of-bag criterion of every configuration of a grid.

    The criterion is the out-of-bag MSE for regressors and the out-of-bag error rate for classifiers. `best` is the
    configuration with the smallest criterion, ties going to the smallest `(ntree, mtry, nodesize)`.
    """

    entries: tuple[GridEntry, ...]
    best_index: int

    @property
    def best(self) -> ForestConfig:
        return self.entries[self.best_index].config

    @property
    def best_forest(self) -> Optional[Forest]:
        return self.entries[self.best_index].forest


class _Split(NamedTuple):
    impurity: float
    feature: int
    threshold: float


def split_impurity(left_n: Any, left_pos: Any, right_n: Any, right_pos: Any) -> Any:
    """Impurity of a split, from the size and number of positives of each child.

    Each child contributes `pos - pos^2 / n`, its number of rows times half its Gini impurity, which is also its
    sum of squared deviations from the mean label.

    >>> float(split_impurity(2, 0, 2, 2))
    0.0
    >>> float(split_impurity(2, 1, 2, 1))
    1.0

    """
    return left_pos - left_pos**2 / left_n + right_pos - right_pos**2 / right_n


def _midpoint(low: float, high: float) -> float:
    middle = (low + high) / 2.0
    # Rounding can land on `high`, which would send it to the left child
    return middle if middle < high else low


def _best_split_on(values: FloatArray, labels: FloatArray, nodesize: int) -> Optional[tuple[float, float]]:
    """Best threshold of one feature: a midpoint between consecutive distinct values, `nodesize` rows per side."""
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    n = len(values)
    left_n = np.arange(1, n, dtype=np.float64)
    left_pos = np.cumsum(labels[order])[:-1]
    right_n = n - left_n
    right_pos = labels.sum() - left_pos
    valid = (sorted_values[:-1] < sorted_values[1:]) & (left_n >= nodesize) & (right_n >= nodesize)
    if not valid.any():
        return None
    impurity = np.where(valid, split_impurity(left_n, left_pos, right_n, right_pos), np.inf)
    i = int(np.argmin(impurity))
    return float(impurity[i]), _midpoint(float(sorted_values[i]), float(sorted_values[i + 1]))


def best_split(
    features: FloatArray, labels: FloatArray, candidates: Sequence[int], nodesize: int
) -> Optional[_Split]:
    """Best split over the `candidates` features; ties go to the smallest feature index, then threshold."""
    best: Optional[_Split] = None
    for feature in sorted(candidates):
        found = _best_split_on(features[:, feature], labels, nodesize)
        if found is not None and (best is None or found[0] < best.impurity):
            best = _Split(impurity=found[0], feature=feature, threshold=found[1])
    return best


def grow_tree(features: FloatArray, labels: FloatArray, mtry: int, nodesize: int, rng: np.random.Generator) -> Tree:
    """Grow a CART tree on the given rows.

    A node is split if it holds at least `2 * nodesize` rows and both labels; `mtry` features are drawn without
    replacement and the split with the smallest impurity among them is kept. Nodes where no drawn feature admits
    a valid split become leaves.
    """
    n_all_features = features.shape[1]
    feature: list[int] = [LEAF]
    threshold: list[float] = [np.nan]
    left: list[int] = [LEAF]
    right: list[int] = [LEAF]
    value: list[float] = [float(labels.mean())]
    stack = [(0, np.arange(len(labels)))]
    while stack:
        node, rows = stack.pop()
        node_labels = labels[rows]
        positives = node_labels.sum()
        if len(rows) < 2 * nodesize or positives == 0 or positives == len(rows):
            continue
        candidates = rng.choice(n_all_features, size=mtry, replace=False)
        split = best_split(features[rows], node_labels, candidates.tolist(), nodesize)
        if split is None:
            continue
        goes_left = features[rows, split.feature] <= split.threshold
        children = []
        for child_rows in (rows[goes_left], rows[~goes_left]):
            children.append(len(feature))
            feature.append(LEAF)
            threshold.append(np.nan)
            left.append(LEAF)
            right.append(LEAF)
            value.append(float(labels[child_rows].mean()))
        feature[node], threshold[node] = split.feature, split.threshold
        left[node], right[node] = children
        stack.append((children[1], rows[~goes_left]))
        stack.append((children[0], rows[goes_left]))
    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


def train(dataset: TabularDataset, config: ForestConfig) -> Forest:
    """Train a forest of `config.ntree` trees, each grown on a bootstrap resample of the rows.

    Each tree draws from its own generator, spawned from `config.seed`: the forest only depends on the dataset and
    the configuration.

    Args:
        dataset: training data
        config: hyperparameters

    Returns:
        the trained forest

    Raises:
        InvalidInputError: if `mtry` exceeds the number of features or there are fewer than `2 * nodesize` rows
    """
    if config.mtry > dataset.n_features:
        raise InvalidInputError(f"mtry={config.mtry} exceeds the number of features ({dataset.n_features})")
    n = dataset.n_rows
    if n < 2 * config.nodesize:
        raise InvalidInputError(f"nodesize={config.nodesize} requires at least {2 * config.nodesize} rows, got {n}")
    labels = dataset.labels.astype(np.float64)
    trees = []
    counts = np.zeros((config.ntree, n), dtype=np.int64)
    degenerate = 0
    for m, child_seed in enumerate(np.random.SeedSequence(config.seed).spawn(config.ntree)):
        rng = np.random.default_rng(child_seed)
        counts[m] = np.bincount(rng.integers(0, n, size=n), minlength=n)
        rows = np.repeat(np.arange(n), counts[m])
        tree = grow_tree(dataset.features[rows], labels[rows], config.mtry, config.nodesize, rng)
        root_value = tree.value[0]
        if tree.n_nodes == 1 and 0.0 < root_value < 1.0:
            degenerate += 1
        trees.append(tree)
    if degenerate:
        message = f"{degenerate} of {config.ntree} trees could not split their root and are single leaves"
        logger.warning(message)
        warnings.warn(message, DegenerateTreeWarning, stacklevel=2)
    logger.debug(
        "Trained %s forest: %d trees, %.1f leaves on average",
        config.kind,
        config.ntree,
        np.mean([t.n_leaves for t in trees]),
    )
    return Forest(config=config, trees=tuple(trees), inbag_counts=counts, n_features=dataset.n_features)


def _tree_scores(forest: Forest, features: FloatArray) -> FloatArray:
    """Per-tree contributions, shape `(ntree, n_rows)`: votes for classifiers, leaf means for regressors."""
    leaf_means = np.array([tree.predict(features) for tree in forest.trees])
    if forest.kind == "classifier":
        return (leaf_means >= VOTE_THRESHOLD).astype(np.float64)
    return leaf_means


def _check_features(forest: Forest, features: Any) -> FloatArray:
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != forest.n_features:
        raise InvalidInputError(f"expected {forest.n_features} features, got {features.shape[1]}")
    return features


def predict_score(forest: Forest, features: Any) -> FloatArray:
    """Score rows with the forest: share of trees voting 1 (classifier) or mean of leaf means (regressor)."""
    features = _check_features(forest, features)
    return np.asarray(_tree_scores(forest, features).mean(axis=0), dtype=np.float64)


def oob_scores(forest: Forest, features: Any) -> tuple[FloatArray, BoolArray]:
    """Score each training row with the trees it was left out of.

    Returns:
        the scores (NaN for rows that were in every resample) and the mask of rows that got a score
    """
    features = _check_features(forest, features)
    out_of_bag = forest.out_of_bag
    if features.shape[0] != out_of_bag.shape[1]:
        raise InvalidInputError(f"expected the {out_of_bag.shape[1]} training rows, got {features.shape[0]}")
    contributions = np.where(out_of_bag, _tree_scores(forest, features), 0.0)
    n_trees = out_of_bag.sum(axis=0)
    evaluated = n_trees > 0
    scores = np.full(features.shape[0], np.nan)
    scores[evaluated] = contributions.sum(axis=0)[evaluated] / n_trees[evaluated]
    return scores, evaluated


def oob_criterion(forest: Forest, dataset: TabularDataset) -> OobResult:
    """Out-of-bag MSE (regressor) or error rate at threshold 0.5 (classifier) on the training data.

    Raises:
        OutOfBagError: if every row was drawn in every resample
    """
    scores, evaluated = oob_scores(forest, dataset.features)
    n_evaluated = int(evaluated.sum())
    if n_evaluated == 0:
        raise OutOfBagError(f"no row is out of bag with ntree={forest.config.ntree}")
    labels = dataset.labels[evaluated]
    if forest.kind == "classifier":
        criterion = float(np.mean((scores[evaluated] >= VOTE_THRESHOLD).astype(np.int64) != labels))
    else:
        criterion = float(np.mean((scores[evaluated] - labels) ** 2))
    return OobResult(criterion=criterion, n_evaluated=n_evaluated, n_skipped=len(scores) - n_evaluated)


def grid_search(dataset: TabularDataset, grid: Sequence[ForestConfig], keep_forests: bool = False) -> GridResult:
    """Train every configuration and select the one with the smallest out-of-bag criterion.

    Args:
        dataset: training data
        grid: configurations to try, non-empty
        keep_forests: whether to keep the trained forests in the result

    Returns:
        the criterion of each configuration, in grid order, and the best one
    """
    if not grid:
        raise InvalidInputError("the grid must contain at least one configuration")
    entries = []
    for config in grid:
        forest = train(dataset, config)
        oob = oob_criterion(forest, dataset)
        logger.info(
            "%s ntree=%d mtry=%d nodesize=%d: OOB criterion %.6g (%d rows skipped)",
            config.kind,
            config.ntree,
            config.mtry,
            config.nodesize,
            oob.criterion,
            oob.n_skipped,
        )
        entries.append(GridEntry(config=config, oob=oob, forest=forest if keep_forests else None))
    best_index = min(range(len(entries)), key=lambda i: (entries[i].oob.criterion, entries[i].config.sort_key))
    return GridResult(entries=tuple(entries), best_index=best_index)


def product_grid(
    kind: ForestKind,
    seed: int,
    n_features: int,
    ntrees: Sequence[int],
    mtries: Sequence[int],
    nodesizes: Sequence[int],
) -> list[ForestConfig]:
    """Cross ntree, mtry and nodesize values. Values of mtry above `n_features` are clipped and duplicates removed."""
    mtry_values = sorted({min(m, n_features) for m in mtries})
    return [
        ForestConfig(kind=kind, ntree=ntree, mtry=mtry, nodesize=nodesize, seed=seed)
        for ntree in sorted(set(ntrees))
        for mtry in mtry_values
        for nodesize in sorted(set(nodesizes))
    ]


def desk_grid(kind: ForestKind, seed: int, n_features: int, full_scale: bool = False) -> list[ForestConfig]:
    """Default hyperparameter grid: `DESK_GRID`, or `FULL_GRID` if `full_scale`.

    >>> len(desk_grid("regressor", seed=0, n_features=4))
    8

    """
    return product_grid(kind, seed, n_features, *(FULL_GRID if full_scale else DESK_GRID))
