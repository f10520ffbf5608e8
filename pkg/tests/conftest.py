import logging
from contextlib import nullcontext as does_not_raise
from pathlib import Path

import numpy as np
import pytest

try:
    from _pytest.python_api import RaisesContext
except ImportError:  # pytest >= 8.4 moved the class returned by pytest.raises
    from _pytest.raises import RaisesExc as RaisesContext

from lcsuite.data import TabularDataset
from lcsuite.dgp import DgpConfig, SyntheticSample, generate
from lcsuite.metrics import LabeledScores


def error_or_value(outcome):
    if isinstance(outcome, RaisesContext):
        return outcome, lambda x: True

    def assert_is_expected(__x):
        assert __x == outcome

    return does_not_raise(), assert_is_expected


@pytest.fixture
def sample() -> SyntheticSample:
    return generate(DgpConfig(n=2000, seed=0))


@pytest.fixture
def calibrated(sample: SyntheticSample) -> LabeledScores:
    """True probabilities as scores: perfectly calibrated by construction."""
    return LabeledScores(scores=sample.p_true, labels=sample.d, true_p=sample.p_true)


@pytest.fixture
def dataset(sample: SyntheticSample) -> TabularDataset:
    return TabularDataset(columns=("x1", "x2", "x3", "x4"), features=sample.x, labels=sample.d)


@pytest.fixture
def small_dataset() -> TabularDataset:
    rng = np.random.default_rng(42)
    features = rng.uniform(size=(120, 3))
    labels = (features[:, 0] + 0.3 * rng.normal(size=120) > 0.5).astype(np.int64)
    return TabularDataset(columns=("a", "b", "c"), features=features, labels=labels)


@pytest.fixture
def write_text(tmp_path: Path):
    def write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path

    return write


@pytest.fixture
def reset_logging():
    """The command line configures the root logger; undo it after the test."""
    yield
    root = logging.getLogger()
    for handler in root.handlers[:]:
        root.removeHandler(handler)
    root.setLevel(logging.WARNING)
    logging.captureWarnings(False)
