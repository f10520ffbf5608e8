from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import click
import pytest
from click import BadParameter
from pydantic import BaseModel, Field

from lcsuite.cli.options import (
    CommaSeparated,
    ConfigDefault,
    FractionRange,
    _get_type_from_field,
    collect_fields,
    convert_to_click,
    get_option_name,
)
from lcsuite.dgp import DgpConfig, DistortionKind
from lcsuite.locreg import LocRegConfig
from tests.conftest import error_or_value


def test_get_type_from_field_with_unconstrained_int():
    class Foo(BaseModel):
        a: int

    click_type = _get_type_from_field(Foo.model_fields["a"])
    assert isinstance(click_type, click.types.IntParamType)


def test_get_type_from_field_with_constrained_int():
    class Foo(BaseModel):
        a: Annotated[int, Field(ge=0)]

    click_type = _get_type_from_field(Foo.model_fields["a"])
    assert isinstance(click_type, click.IntRange)
    assert click_type.min == 0
    assert click_type.min_open is False


def test_float_fields_accept_fractions():
    click_type = _get_type_from_field(LocRegConfig.model_fields["neighbor_fraction"])
    assert isinstance(click_type, FractionRange)
    assert click_type.convert("1/3", None, None) == 1 / 3


def test_model_defaults_convert_to_none():
    click_type = _get_type_from_field(DgpConfig.model_fields["n"])
    assert click_type.convert(ConfigDefault(2000), None, None) is None
    assert click_type.convert("10", None, None) == 10


@pytest.mark.parametrize(
    "annotation, raw_value, expected_outcome",
    [
        (int, 1, 1),
        (int, "12", 12),
        (Annotated[int, Field(ge=0)], -2, pytest.raises(BadParameter, match="not in the range x>=0")),
        (Annotated[int, Field(gt=0, lt=10)], 0, pytest.raises(BadParameter)),
        (Annotated[int, Field(gt=0, lt=10)], 5, 5),
        (Annotated[float, Field(gt=0)], "3", 3.0),
        (Annotated[float, Field(gt=0)], "1/4", 0.25),
        (Annotated[float, Field(gt=0)], "0", pytest.raises(BadParameter)),
        (Annotated[float, Field(gt=0, le=1)], "3/2", pytest.raises(BadParameter)),
        (float, "1/0", pytest.raises(BadParameter, match="not a valid number or fraction")),
        (float, "abc", pytest.raises(BadParameter)),
        (Literal["platt", "isotonic"], "platt", "platt"),
        (Literal["platt", "isotonic"], "beta", pytest.raises(BadParameter)),
        (Literal[0, 1, 2], "2", 2),
        (Literal[0, 1, 2], 1, 1),
        (DistortionKind, "gamma", "gamma"),
        (DistortionKind, "delta", pytest.raises(BadParameter)),
        (bool, "yes", True),
        (bool, "n", False),
        (bool, "123", pytest.raises(BadParameter)),
        (tuple[float, ...], "1/3, 3", [1 / 3, 3.0]),
        (tuple[int, int], "1,2", [1, 2]),
        (tuple[int, int], "1,2,3", pytest.raises(BadParameter, match="expected 2 comma-separated values")),
        (list[str], "a,b", ["a", "b"]),
        (list[Literal["ece", "lcs"]], "lcs,ece", ["lcs", "ece"]),
        (Path, "out/s.csv", Path("out/s.csv")),
        (dict[str, int], '{"a": 1}', {"a": 1}),
        (dict[str, int], '{"a": "x"}', pytest.raises(BadParameter)),
        (Union[float, str], "3.14", 3.14),
    ],
)
def test_get_type_from_field(annotation, raw_value, expected_outcome):
    class Foo(BaseModel):
        bar: annotation

    click_type = _get_type_from_field(Foo.model_fields["bar"])
    context, check_expected = error_or_value(expected_outcome)
    with context:
        converted_value = click_type.convert(raw_value, None, None)
        check_expected(converted_value)


def test_optional_field_with_none_default():
    class Foo(BaseModel):
        bar: Optional[int] = None

    click_type = _get_type_from_field(Foo.model_fields["bar"])
    assert isinstance(click_type, click.types.IntParamType)
    assert click_type.convert("4", None, None) == 4


def test_comma_separated_name():
    assert CommaSeparated(click.INT).name == "integer,..."


@pytest.mark.parametrize(
    "name, aliases, prefix, is_boolean, expected_result",
    [
        ("foo", {}, "", False, "--foo"),
        ("foo", {}, "", True, "--foo/--no-foo"),
        ("foo", {}, "--pref", False, "--pref-foo"),
        ("foo", {}, "--pref", True, "--pref-foo/--no-pref-foo"),
        ("foo_bar", {}, "", False, "--foo-bar"),
        ("foo_bar", {}, "--pref", True, "--pref-foo-bar/--no-pref-foo-bar"),
        ("Foo", {}, "", False, "--foo"),
        ("foo", {"foo": "--oof"}, "", False, "--oof"),
        ("foo", {"foo": "oof"}, "--pref", False, "--oof"),
        ("foo", {"foo": "--on/--off"}, "", True, "--on/--off"),
        ("bar", {"foo": "--oof"}, "--pref", False, "--pref-bar"),
    ],
)
def test_get_option_name(name, aliases, prefix, is_boolean, expected_result):
    assert get_option_name(name, aliases=aliases, is_boolean=is_boolean, prefix=prefix) == expected_result


def test_collect_fields_keeps_declaration_order():
    fields = collect_fields(LocRegConfig, excluded_fields=["grid_size"])
    assert [field.name for field in fields] == ["degree", "neighbor_fraction"]


def test_convert_to_click():
    options, validate = convert_to_click(DgpConfig)
    assert [option.opts for option in options] == [["--n"], ["--coefficients"], ["--noise-sd"], ["--seed"]]
    by_name = {option.name: option for option in options}
    assert by_name["seed"].required
    assert not by_name["n"].required
    assert repr(by_name["coefficients"].default) == "0.1,0.05,0.2,-0.05"
    assert repr(by_name["noise_sd"].default) == "0.5"
    assert by_name["noise_sd"].help == "standard deviation of the noise"
    config = validate({"n": None, "coefficients": None, "noise_sd": None, "seed": 3})
    assert config == DgpConfig(seed=3)


def test_convert_to_click_with_prefix_and_renames():
    options, validate = convert_to_click(
        LocRegConfig,
        exclude=["degree"],
        prefix="--curve",
        rename={"grid_size": "--points"},
        shorten={"grid_size": "-g"},
    )
    assert [option.opts for option in options] == [["--curve-neighbor-fraction"], ["--points", "-g"]]
    kwargs = {"curve_neighbor_fraction": 0.5, "curve_grid_size": None, "other": 1}
    config = validate(kwargs)
    assert config == LocRegConfig(neighbor_fraction=0.5)
    assert kwargs == {"other": 1}


def test_validate_uses_base_values():
    _, validate = convert_to_click(DgpConfig)
    config = validate({"n": 10, "coefficients": None, "noise_sd": None, "seed": None}, base={"seed": 4, "n": 99})
    assert (config.n, config.seed) == (10, 4)
