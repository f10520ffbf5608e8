from typing import Any

import click
import pytest
from click.testing import CliRunner
from pydantic import BaseModel, ConfigDict, ValidationError

from lcsuite.cli.command import add_options, from_config


class Settings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    a: int = 1
    b: int = 2
    c: int = 3


def _presets(kwargs: dict[str, Any]) -> dict[str, Any]:
    return {"a": 10, "b": 10, "c": 10} if kwargs["preset"] else {}


@click.command()
@click.option("--preset/--no-preset", default=False)
@from_config("settings", Settings, config_file=True, presets=_presets)
def show(settings: Settings, preset: bool) -> None:
    click.echo(f"a={settings.a} b={settings.b} c={settings.c}")


def test_add_options():
    options = [click.Option(["--foo"]), click.Option(["--bar"])]

    def cli(foo, bar):
        click.echo(f"foo={foo}, bar={bar}")

    cli = click.command()(add_options(cli, options))
    runner = CliRunner()
    result = runner.invoke(cli, ["--foo", "abc", "--bar", "123"])
    assert result.output.strip() == "foo=abc, bar=123"


def test_add_options_requires_options():
    with pytest.raises(ValueError, match="No options"):
        add_options(lambda: None)


def test_model_defaults():
    result = CliRunner().invoke(show, [])
    assert result.exit_code == 0
    assert result.output.strip() == "a=1 b=2 c=3"


def test_settings_precedence(write_text):
    path = write_text("settings.conf", "# overrides\nb = 20\nc = 20\n")
    result = CliRunner().invoke(show, ["--preset", "--config", str(path), "--c", "30"])
    assert result.exit_code == 0, result.output
    assert result.output.strip() == "a=10 b=20 c=30"


def test_unknown_keys_in_the_configuration_file(write_text):
    path = write_text("settings.conf", "d = 1\n")
    result = CliRunner().invoke(show, ["--config", str(path)])
    assert isinstance(result.exception, ValidationError)


def test_missing_configuration_file(tmp_path):
    result = CliRunner().invoke(show, ["--config", str(tmp_path / "missing.conf")])
    assert result.exit_code == 2
    assert "does not exist" in result.output


def test_help_shows_model_defaults():
    result = CliRunner().invoke(show, ["--help"])
    assert "--config" in result.output
    assert "[default: 2]" in result.output
