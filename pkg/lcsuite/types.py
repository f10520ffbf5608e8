from typing import Any, Literal, Optional, TypedDict, Union

import click
import numpy as np
import numpy.typing as npt
from typing_extensions import NewType, TypeAlias

FloatArray: TypeAlias = npt.NDArray[np.float64]
IntArray: TypeAlias = npt.NDArray[np.int64]
BoolArray: TypeAlias = npt.NDArray[np.bool_]

MethodName = Literal["platt", "isotonic", "beta", "local0", "local1", "local2"]
MetricName = Literal["brier", "true_mse", "ece", "lcs", "accuracy", "sensitivity", "specificity", "auc"]
SplitName = Literal["full", "calibration", "test"]
ForestKind = Literal["classifier", "regressor"]

METHODS: tuple[MethodName, ...] = ("platt", "isotonic", "beta", "local0", "local1", "local2")
METRICS: tuple[MetricName, ...] = (
    "brier",
    "true_mse",
    "ece",
    "lcs",
    "accuracy",
    "sensitivity",
    "specificity",
    "auc",
)


class _OptionKwargs(TypedDict, total=False):
    """Represent valid parameters for `click.option()`."""

    show_default: Union[bool, str, None]
    is_flag: Optional[bool]
    flag_value: Optional[Any]
    multiple: bool
    type: Optional[Union[click.ParamType, Any]]
    help: Optional[str]
    hidden: bool
    show_choices: bool
    required: bool
    default: Any


ArgumentName = NewType("ArgumentName", str)
OptionName = NewType("OptionName", str)
FieldName = NewType("FieldName", str)
