# cli/main.py
"""Point d'entrée de la CLI `moa-lab`.

Agrège les commandes du sous-package `cli.commands` ; le niveau de journal
par défaut vient des réglages (`configs/settings.yaml`, variables MOA_LAB_*).
"""

import click

from cli.commands import analyze, benchmark, gen_data, gradcheck, paramcount, sweep, train
from src.config.settings import get_settings
from src.monitoring import configure_logging


@click.group(invoke_without_command=True)
@click.option("--log-level", default=None, type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              help="Niveau des journaux JSON (stderr).")
@click.pass_context
def cli(ctx, log_level):
    """Laboratoire Dense / Soft Mixture-of-Adapters sur spectrogrammes synthétiques."""
    configure_logging(level=(log_level or get_settings().log_level).upper())
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


cli.add_command(train.train)
cli.add_command(benchmark.benchmark)
cli.add_command(gradcheck.gradcheck)
cli.add_command(sweep.sweep)
cli.add_command(analyze.analyze)
cli.add_command(paramcount.paramcount)
cli.add_command(gen_data.gen_data)

if __name__ == "__main__":
    cli()
