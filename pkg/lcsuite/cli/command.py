"""Attach configuration models to Click commands."""

import functools
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar, Union

import click
from pydantic import BaseModel

from lcsuite.cli.options import convert_to_click
from lcsuite.io import read_settings_file
from lcsuite.types import _OptionKwargs

T = TypeVar("T")

CONFIG_FILE_ARGUMENT = "config_file"


def add_options(
    target: Union[Callable[..., Any], list[click.Option]], options: Optional[list[click.Option]] = None
) -> Callable[..., Any]:
    """Attach `click.Option`s to a function or command.

    `add_options(f, options)` returns `f` with the options attached; `add_options(options)` returns a decorator
    doing the same, to be placed under `@click.command()`.
    """
    if not callable(target):
        return functools.partial(_attach, options=target)
    if options is None:
        raise ValueError("No options to add to the command")
    return _attach(target, options)


def _attach(f: Callable[..., Any], options: list[click.Option]) -> Callable[..., Any]:
    # Click pops decorator params in reverse declaration order
    params = list(reversed(options))
    if isinstance(f, click.Command):
        f.params.extend(params)
        return f
    pending = getattr(f, "__click_params__", None)
    if pending is None:
        pending = []
        f.__click_params__ = pending  # type: ignore[attr-defined]
    pending.extend(params)
    return f


def config_file_option() -> click.Option:
    return click.Option(
        [CONFIG_FILE_ARGUMENT, "--config"],
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        default=None,
        help="`key = value` file of settings; command-line options take precedence",
    )


def from_config(
    variable_name: str,
    model: type[BaseModel],
    *,
    exclude: Sequence[str] = (),
    rename: Optional[Mapping[str, str]] = None,
    shorten: Optional[Mapping[str, str]] = None,
    prefix: Optional[str] = None,
    extra_options: Optional[Mapping[str, _OptionKwargs]] = None,
    config_file: bool = False,
    presets: Optional[Callable[[Mapping[str, Any]], Mapping[str, Any]]] = None,
) -> Callable[[Callable[..., T]], Callable[..., T]]:
    """Decorator adding the fields of a configuration model as options of a Click command.

    The decorated function receives the validated model as `variable_name`. Settings are resolved from, by increasing
    precedence: the model defaults, `presets`, the configuration file (if `config_file`), the command-line options.

    Args:
        variable_name: name of the argument receiving the model
        model: configuration model
        exclude: fields that won't be added to the command
        rename: mapping from field names to option names
        shorten: mapping from field names to short option names
        prefix: prefix of the option names
        extra_options: extra keyword arguments of `click.Option`, per field name
        config_file: whether to add a `--config` option reading a `key = value` file
        presets: function of the other command arguments returning base settings

    Returns:
        a decorator that adds options to a function
    """
    options, validator = convert_to_click(
        model, exclude=exclude, rename=rename, shorten=shorten, prefix=prefix, extra_options=extra_options
    )
    if config_file:
        options = [config_file_option(), *options]

    def wrapper(f: Callable[..., T]) -> Callable[..., T]:
        @add_options(options)
        @functools.wraps(f)
        def wrapped(**kwargs: Any) -> T:
            base: dict[str, Any] = dict(presets(kwargs)) if presets is not None else {}
            path = kwargs.pop(CONFIG_FILE_ARGUMENT, None) if config_file else None
            if path is not None:
                base.update(read_settings_file(path))
            kwargs[variable_name] = validator(kwargs, base=base)
            return f(**kwargs)

        return wrapped  # type: ignore[no-any-return]

    return wrapper
