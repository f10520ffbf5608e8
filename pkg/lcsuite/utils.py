import math
import re
from fractions import Fraction
from typing import Annotated, Any

import numpy as np
from pydantic import BeforeValidator

from lcsuite.errors import InvalidInputError, SingleClassError
from lcsuite.types import FloatArray, IntArray


def snake_case_to_kebab_case(name: str) -> str:
    """Convert snake case name to kebab case.

    >>> snake_case_to_kebab_case('noise_sd')
    'noise-sd'

    """
    return name.lower().replace("_", "-")


def strip_option_name(name: str) -> str:
    """Strip leading and trailing dashes from an option name.

    >>> strip_option_name('--grid-size-')
    'grid-size'

    """
    return re.sub("-+$", "", re.sub("^-+", "", name))


def parse_fraction(text: str) -> float:
    """Parse a decimal or a fraction such as `1/3`.

    >>> parse_fraction('1/3') == 1 / 3
    True
    >>> parse_fraction('0.5')
    0.5

    """
    text = text.strip()
    if "/" in text:
        numerator, denominator = text.split("/", 1)
        return float(numerator) / float(denominator)
    return float(text)


def parse_cell(text: str) -> float:
    """Parse one CSV cell with Python's correctly rounded float parser; NaN if it isn't a number.

    >>> parse_cell("0.1") == 0.1
    True
    >>> parse_cell("x")
    nan

    """
    try:
        return float(text)
    except ValueError:
        return math.nan


def coerce_fraction(value: Any) -> Any:
    """Parse strings with `parse_fraction`, pass anything else through."""
    if isinstance(value, str):
        try:
            return parse_fraction(value)
        except (ValueError, ZeroDivisionError):
            return value
    return value


def split_commas(value: Any) -> Any:
    """Split a comma-separated string into its stripped items, pass anything else through.

    >>> split_commas("1/3, 1,3")
    ['1/3', '1', '3']

    """
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


FractionFloat = Annotated[float, BeforeValidator(coerce_fraction)]


def format_fraction(value: float) -> str:
    """Render a scenario value, using a small fraction when it is one.

    >>> format_fraction(1 / 3)
    '1/3'
    >>> format_fraction(3.0)
    '3'
    >>> format_fraction(0.5)
    '0.5'

    """
    fraction = Fraction(value).limit_denominator(100)
    if fraction.denominator == 1 and float(fraction) == value:
        return str(fraction.numerator)
    if len(repr(value)) <= 6 or abs(float(fraction) - value) > 1e-12:
        return repr(value)
    return str(fraction)


def as_float_array(values: Any, name: str) -> FloatArray:
    """Convert `values` to a 1-d float array without NaN."""
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 1:
        raise InvalidInputError(f"`{name}` must be one-dimensional, got shape {array.shape}")
    if np.isnan(array).any():
        raise InvalidInputError(f"`{name}` contains NaN at position {int(np.flatnonzero(np.isnan(array))[0])}")
    return array


def as_scores(values: Any, name: str = "scores") -> FloatArray:
    """Convert `values` to a 1-d float array within [0, 1]."""
    array = as_float_array(values, name)
    outside = (array < 0.0) | (array > 1.0)
    if outside.any():
        position = int(np.flatnonzero(outside)[0])
        raise InvalidInputError(f"`{name}` must lie in [0, 1], got {array[position]} at position {position}")
    return array


def as_labels(values: Any, name: str = "labels") -> IntArray:
    """Convert `values` to a 1-d array of 0/1 integers."""
    array = as_float_array(values, name)
    invalid = (array != 0.0) & (array != 1.0)
    if invalid.any():
        position = int(np.flatnonzero(invalid)[0])
        raise InvalidInputError(f"`{name}` must be binary, got {array[position]} at position {position}")
    return array.astype(np.int64)


def require_both_classes(labels: IntArray) -> None:
    """Raise if `labels` doesn't contain both 0 and 1."""
    positives = int(labels.sum())
    if positives == 0 or positives == len(labels):
        raise SingleClassError(f"both classes are required, got {len(labels)} labels with {positives} positives")
