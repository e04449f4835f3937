# cli/commands/sweep.py
"""Commande `sweep` : balayages budget / adapters / slots."""

from pathlib import Path
from typing import Optional

import click

from cli.commands.common import config_option, handle_errors, load_config, out_option, seed_option
from src.experiments.reporting import write_csv
from src.experiments.run_config import SweepMode
from src.experiments.sweep import run_sweep


@click.command()
@config_option
@out_option
@seed_option
@click.option("--mode", type=click.Choice([m.value for m in SweepMode]), default=None,
              help="Remplace `sweep.mode` de la configuration.")
@click.option("--dry-run", is_flag=True, help="Calcule les effectifs de paramètres sans entraîner.")
@handle_errors
def sweep(config_path: Path, out_dir: Optional[Path], seed: Optional[int], mode: Optional[str], dry_run: bool):
    """Entraîne chaque point de la grille sur les mêmes données et écrit `sweep.csv`."""
    config = load_config(config_path, seed, out_dir)
    if mode is not None:
        config = config.model_copy(update={"sweep": config.sweep.model_copy(update={"mode": SweepMode(mode)})})
    frame = run_sweep(config, dry_run=dry_run)
    write_csv(frame, Path(config.out) / "sweep.csv", config.config_hash)
    for row in frame.itertuples():
        status = "✅" if row.feasible else "❌ infaisable"
        click.echo(f"{status} {row.setting:<8} r={row.r} params={row.params} accuracy={row.accuracy}")
