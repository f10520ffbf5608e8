"""Convert configuration models to Click options, and parsed options back to models.

Every field of a (flat) Pydantic model becomes one option named after the field in kebab case:

- numerical constraints (`Field(gt=0)`, `annotated_types.Le`...) become `click.IntRange`/`click.FloatRange`, and
  float options also accept fractions such as `1/3`;
- `Literal` and `Enum` fields become `click.Choice`;
- tuple and list fields take one comma-separated value, each item converted like a scalar field;
- boolean fields become `--name/--no-name` flags;
- fields without a default are required options.

Options left out of the command line are dropped before validation, so the model defaults (or any base values, for
example read from a configuration file) apply.
"""

import dataclasses
import enum
import functools
import re
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Annotated, Any, Callable, Literal, Optional, TypedDict, TypeVar, Union, cast, get_args, get_origin

import click
from annotated_types import Ge, Gt, Le, Lt, SupportsGe, SupportsGt, SupportsLe, SupportsLt
from pydantic import BaseModel, TypeAdapter, ValidationError
from pydantic.fields import FieldInfo
from pydantic_core import PydanticUndefined

from lcsuite.types import ArgumentName, FieldName, OptionName, _OptionKwargs
from lcsuite.utils import format_fraction, parse_fraction, snake_case_to_kebab_case, split_commas, strip_option_name

M = TypeVar("M", bound=BaseModel)
NoneType = type(None)


class _RangeDict(TypedDict, total=False):
    """Represent arguments to `click.IntRange` or `click.FloatRange`."""

    max: Union[SupportsLt, SupportsLe]
    min: Union[SupportsGt, SupportsGe]
    max_open: bool
    min_open: bool


class ConfigDefault:
    """A model default shown in the help; converted to None so that the model applies its own default."""

    def __init__(self, default: Any) -> None:
        self._default = default

    def __getattr__(self, attr: Any) -> Any:
        return getattr(self._default, attr)

    def __eq__(self, value: object) -> Any:
        return self._default.__eq__(value)

    def __bool__(self) -> bool:
        return bool(self._default)

    def __repr__(self) -> Any:
        if isinstance(self._default, (tuple, list)):
            return ",".join(_format_default(item) for item in self._default)
        return _format_default(self._default)


def _format_default(value: Any) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, float):
        return format_fraction(value)
    return str(value)


class ConfigParamType(click.ParamType):
    """Wraps a click.ParamType so that `ConfigDefault` values convert to None."""

    def __init__(self, actual_type: click.ParamType) -> None:
        self._actual_type = actual_type

    @property
    def actual_type(self) -> click.ParamType:
        return self._actual_type

    def convert(self, value: Any, param: Optional[click.Parameter], ctx: Optional[click.Context]) -> Any:
        if isinstance(value, ConfigDefault):
            return None
        return self._actual_type.convert(value, param, ctx)

    def __getattr__(self, attr: Any) -> Any:
        return getattr(self._actual_type, attr)


def _wrap_type(field_type: click.ParamType) -> click.ParamType:
    wrapped: type[ConfigParamType] = type("ConfigParamType", (ConfigParamType, field_type.__class__), {})
    return wrapped(field_type)


class FractionRange(click.FloatRange):
    """Float range that also accepts fractions such as `1/3`."""

    name = "fraction"

    def convert(self, value: Any, param: Optional[click.Parameter], ctx: Optional[click.Context]) -> Any:
        if isinstance(value, str):
            try:
                value = parse_fraction(value)
            except (ValueError, ZeroDivisionError):
                self.fail(f"{value!r} is not a valid number or fraction.", param, ctx)
        return super().convert(value, param, ctx)


class LiteralChoice(click.Choice):
    """Choice among the values of a `Literal`, converted back to the original values."""

    def __init__(self, values: Sequence[Any]) -> None:
        self.values = {str(value): value for value in values}
        super().__init__(list(self.values))

    def convert(self, value: Any, param: Optional[click.Parameter], ctx: Optional[click.Context]) -> Any:
        if not isinstance(value, str) and value in self.values.values():
            return value
        return self.values[super().convert(value, param, ctx)]


class CommaSeparated(click.ParamType):
    """A comma-separated list whose items are converted with `item_type`."""

    def __init__(self, item_type: click.ParamType, length: Optional[int] = None) -> None:
        self.item_type = item_type
        self.length = length
        self.name = f"{item_type.name},..."

    def convert(self, value: Any, param: Optional[click.Parameter], ctx: Optional[click.Context]) -> Any:
        items = split_commas(value)
        if self.length is not None and len(items) != self.length:
            self.fail(f"expected {self.length} comma-separated values, got {len(items)}.", param, ctx)
        return [self.item_type.convert(item, param, ctx) for item in items]


@dataclasses.dataclass
class _Field:
    """A field of a configuration model.

    Attributes:
        name: name of the field
        field_info: Pydantic `FieldInfo` object representing the field
    """

    name: FieldName
    field_info: FieldInfo

    @property
    def is_boolean_flag(self) -> bool:
        return self.field_info.annotation is bool

    @property
    def documentation(self) -> Optional[str]:
        return self.field_info.description


def collect_fields(model: type[BaseModel], excluded_fields: Iterable[str] = frozenset()) -> list[_Field]:
    """Collect the fields of a model, in declaration order, except `excluded_fields`."""
    excluded = set(excluded_fields)
    return [
        _Field(name=FieldName(name), field_info=field)
        for name, field in model.model_fields.items()
        if name not in excluded
    ]


def _get_range_from_metadata(metadata: Iterable[Any]) -> _RangeDict:
    """Convert numerical constraints to keyword arguments of `IntRange` and `FloatRange`."""
    range_args: _RangeDict = {}
    for constraint in metadata:
        if isinstance(constraint, Le):
            range_args["max"] = constraint.le
            range_args["max_open"] = False
        if isinstance(constraint, Lt):
            range_args["max"] = constraint.lt
            range_args["max_open"] = True
        if isinstance(constraint, Ge):
            range_args["min"] = constraint.ge
            range_args["min_open"] = False
        if isinstance(constraint, Gt):
            range_args["min"] = constraint.gt
            range_args["min_open"] = True
    return range_args


def _unwrap_annotated(annotation: Any, metadata: Sequence[Any] = ()) -> tuple[Any, list[Any]]:
    """Split `Annotated[T, ...]` into `T` and its metadata, added to `metadata`."""
    collected = list(metadata)
    while get_origin(annotation) is Annotated:
        annotation, *extra = get_args(annotation)
        collected.extend(extra)
    return annotation, collected


def _get_click_type(annotation: Any, metadata: Sequence[Any] = (), default: Any = PydanticUndefined) -> click.ParamType:
    """Map a type annotation to a Click type, on a best effort basis.

    Types without a Click equivalent are parsed as JSON and validated by Pydantic.
    """
    annotation, metadata = _unwrap_annotated(annotation, metadata)
    origin, args = get_origin(annotation), get_args(annotation)
    if origin is Union and len(args) == 2 and NoneType in args and default is None:
        # None only serves as a default value: parse as the other type
        annotation = next(arg for arg in args if arg is not NoneType)
        return _get_click_type(annotation, metadata)
    if annotation is str:
        return click.STRING
    if annotation is bool:
        return click.BOOL
    if annotation is int:
        range_args = _get_range_from_metadata(metadata)
        return click.IntRange(**range_args) if range_args else click.INT  # type: ignore[arg-type]
    if annotation is float:
        return FractionRange(**_get_range_from_metadata(metadata))  # type: ignore[arg-type]
    if annotation is Path:
        return click.Path(path_type=Path)
    if origin is Literal:
        return LiteralChoice(args)
    if isinstance(annotation, type) and issubclass(annotation, enum.Enum):
        return click.Choice([str(member.value) for member in annotation])
    if origin in (tuple, list) and args:
        if origin is tuple and len(args) == 2 and args[1] is Ellipsis:
            return CommaSeparated(_get_click_type(args[0]))
        if origin is list:
            return CommaSeparated(_get_click_type(args[0]))
        if len(set(args)) == 1:
            return CommaSeparated(_get_click_type(args[0]), length=len(args))
    return _create_custom_type(annotation)


def _create_custom_type(annotation: Any) -> click.ParamType:
    """Create a Click type parsing JSON strings with a Pydantic `TypeAdapter`."""
    name = "".join(part.capitalize() for part in re.split(r"\W", str(annotation)) if part)
    type_adapter = TypeAdapter(cast(type[Any], annotation))

    def convert(self, value, param, ctx):  # type: ignore[no-untyped-def]
        try:
            if isinstance(value, str):
                return type_adapter.validate_json(value)
            return type_adapter.validate_python(value)
        except ValidationError as e:
            self.fail(str(e), param, ctx)

    custom_type: type[click.ParamType] = type(name, (click.ParamType,), {"name": "JSON STRING", "convert": convert})
    return custom_type()


def _get_type_from_field(field: FieldInfo) -> click.ParamType:
    """Get the Click type of a field, wrapped so that model defaults are left to the model."""
    return _wrap_type(_get_click_type(field.annotation, field.metadata, field.default))


def _get_default_value_from_field(field: FieldInfo) -> Optional[ConfigDefault]:
    if field.default is not None and field.default is not PydanticUndefined:
        return ConfigDefault(field.default)
    if field.default_factory is not None:
        return ConfigDefault(field.get_default(call_default_factory=True))
    return None


def get_option_name(
    name: FieldName, *, aliases: Mapping[str, str], is_boolean: bool = False, prefix: str = ""
) -> OptionName:
    """Get the option name of a field.

    >>> get_option_name("noise_sd", aliases={})
    '--noise-sd'
    >>> get_option_name("smote", aliases={}, is_boolean=True)
    '--smote/--no-smote'
    >>> get_option_name("seed", aliases={}, prefix="--forest")
    '--forest-seed'
    >>> get_option_name("n", aliases={"n": "--rows"})
    '--rows'

    Args:
        name: field name
        aliases: mapping from field names to option names, overriding the default option names
        is_boolean: whether the field is a boolean flag, which gets a `--no-` counterpart
        prefix: prefix to prepend to the option name, ignored for aliased fields

    Returns:
        option name, in kebab case and with two leading dashes
    """
    if name in aliases:
        base_name = "--" + strip_option_name(aliases[name])
    elif prefix:
        base_name = "--" + snake_case_to_kebab_case(f"{strip_option_name(prefix)}-{name}")
    else:
        base_name = "--" + snake_case_to_kebab_case(name)
    if not is_boolean or "/" in base_name:
        return OptionName(base_name)
    flag = base_name[2:]
    return OptionName(f"--{flag}/--no-{flag}")


def _get_option_from_field(
    argument_name: ArgumentName,
    option_name: str,
    field_info: FieldInfo,
    documentation: Optional[str] = None,
    short_name: Optional[str] = None,
    option_kwargs: Optional[_OptionKwargs] = None,
) -> click.Option:
    """Convert a field to a Click option.

    Args:
        argument_name: name of the variable receiving the option, a valid and unique Python identifier
        option_name: name of the option (in kebab-case, starting with two dashes)
        field_info: field to convert
        documentation: help string of the option
        short_name: short name of the option (one dash and one letter)
        option_kwargs: extra keyword arguments of `click.Option`

    Returns:
        `click.Option` object
    """
    param_decls = [argument_name, option_name]
    if short_name is not None:
        param_decls.append(short_name)
    kwargs: _OptionKwargs = {
        "type": _get_type_from_field(field_info),
        "default": _get_default_value_from_field(field_info),
        "required": field_info.is_required(),
        "help": documentation,
        "show_default": field_info.default is not PydanticUndefined and field_info.default is not None,
    }
    if option_kwargs is not None:
        kwargs.update(option_kwargs)
    return click.Option(param_decls=param_decls, **kwargs)


def convert_fields_to_options(
    fields: list[_Field],
    prefix: Optional[str] = None,
    aliases: Optional[Mapping[str, str]] = None,
    shorten: Optional[Mapping[str, str]] = None,
    extra_options: Optional[Mapping[str, _OptionKwargs]] = None,
) -> tuple[dict[ArgumentName, FieldName], list[click.Option]]:
    """Convert fields to Click options.

    Returns:
        a pair `(qualified_names, options)` where `qualified_names` maps argument names to field names
    """
    aliases = aliases or {}
    shorten = shorten or {}
    extra_options = extra_options or {}
    argument_prefix = strip_option_name(prefix).replace("-", "_") + "_" if prefix else ""
    options = []
    qualified_names = {}
    for field in fields:
        argument_name = ArgumentName(argument_prefix + field.name)
        option = _get_option_from_field(
            argument_name=argument_name,
            option_name=get_option_name(
                field.name, aliases=aliases, is_boolean=field.is_boolean_flag, prefix=prefix or ""
            ),
            field_info=field.field_info,
            documentation=field.documentation,
            short_name=shorten.get(field.name),
            option_kwargs=extra_options.get(field.name),
        )
        options.append(option)
        qualified_names[argument_name] = field.name
    return qualified_names, options


def model_validate_kwargs(
    kwargs: dict[str, Any],
    model: type[M],
    qualified_names: Mapping[ArgumentName, FieldName],
    base: Optional[Mapping[str, Any]] = None,
) -> M:
    """Instantiate `model` from parsed options.

    Options are popped from `kwargs`; those left to their default (None) are dropped, so values from `base`, then the
    model defaults, apply.

    >>> class Foo(BaseModel):
    ...     a: int
    ...     b: str = "b"
    >>> model_validate_kwargs({"arg_a": None, "arg_b": "c"}, Foo, {"arg_a": "a", "arg_b": "b"}, base={"a": 1})
    Foo(a=1, b='c')

    Args:
        kwargs: mapping from argument names to their values, modified in place
        model: model to instantiate
        qualified_names: mapping from argument names to field names
        base: values overridden by the options

    Returns:
        an instance of `model`
    """
    values = dict(base or {})
    for argument_name in qualified_names.keys() & kwargs.keys():
        value = kwargs.pop(argument_name)
        if value is not None:
            values[qualified_names[argument_name]] = value
    return model.model_validate(values)


def convert_to_click(
    model: type[M],
    *,
    exclude: Sequence[str] = (),
    rename: Optional[Mapping[str, str]] = None,
    shorten: Optional[Mapping[str, str]] = None,
    prefix: Optional[str] = None,
    extra_options: Optional[Mapping[str, _OptionKwargs]] = None,
) -> tuple[list[click.Option], Callable[..., M]]:
    """Extract Click options from a configuration model.

    ```python
    options, validate = convert_to_click(DgpConfig)

    @click.command()
    @add_options(options)
    def simulate(**kwargs):
        config = validate(kwargs)
    ```

    Args:
        model: Pydantic model
        exclude: fields to leave out; they must have a default
        rename: mapping from field names to option names
        shorten: mapping from field names to short option names
        prefix: prefix of the option names, except renamed ones
        extra_options: extra keyword arguments of `click.Option`, per field name

    Returns:
        a pair `(options, validate)`: `validate(kwargs, base=None)` builds the model from the parsed options
    """
    fields = collect_fields(model, excluded_fields=exclude)
    qualified_names, options = convert_fields_to_options(
        fields, prefix=prefix, aliases=rename, shorten=shorten, extra_options=extra_options
    )
    validator = functools.partial(model_validate_kwargs, model=model, qualified_names=qualified_names)
    return options, validator
