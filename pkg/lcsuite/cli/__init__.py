from lcsuite.cli.command import add_options, from_config
from lcsuite.cli.main import cli, run
from lcsuite.cli.options import convert_to_click

__all__ = ("add_options", "cli", "convert_to_click", "from_config", "run")
