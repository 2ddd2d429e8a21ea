import logging
import sys

import click


from rydbergscan.experiment import command_list_presets, command_run, command_show_preset


_logger = logging.getLogger("rydbergscan")


def _setup_logging(verbose: bool) -> None:
    log_level = logging.DEBUG if verbose else logging.INFO

    _logger.setLevel(log_level)
    # Repeated invocations in one process (tests) must not stack handlers.
    for handler in list(_logger.handlers):
        _logger.removeHandler(handler)

    ch = logging.StreamHandler(sys.stderr)
    ch.setLevel(log_level)
    formatter = logging.Formatter("%(levelname)-7s | %(message)s")
    ch.setFormatter(formatter)
    _logger.addHandler(ch)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="show debug output")
def cli(verbose):
    _setup_logging(verbose)


@cli.command()
@click.option(
    "-c",
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, file_okay=True),
    help="Experiment configuration file, JSON or TOML",
)
@click.option("-p", "--preset", type=click.STRING, help="Name of a shipped preset, see 'presets list'")
@click.option(
    "-o",
    "--out",
    "output_dir",
    type=click.Path(dir_okay=True, file_okay=False),
    help="Output directory, overrides output.directory of the config",
)
@click.option("-t", "--threads", type=int, default=None, help="Number of threads for the grid points")
def run(config_path, preset, output_dir, threads):
    """Run an experiment: spectrum, sweep, extract, feasibility or roundtrip."""
    exit_code = command_run(config_path=config_path, preset=preset, output_dir=output_dir, threads=threads)
    sys.exit(exit_code)


@cli.group()
def presets():
    """Shipped experiment configurations."""


@presets.command("list")
def list_presets():
    """List the names of the shipped presets."""
    command_list_presets()


@presets.command("show")
@click.argument("name")
def show_preset(name):
    """Print the configuration of a preset."""
    sys.exit(command_show_preset(name))


if __name__ == "__main__":
    cli()
