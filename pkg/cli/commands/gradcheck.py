# cli/commands/gradcheck.py
"""Commande `gradcheck` : différences finies centrées sur un petit modèle."""

from pathlib import Path
from typing import Optional

import click

from cli.commands.common import config_option, handle_errors, load_config, out_option, seed_option
from src.error_management import EXIT_NUMERIC_FAILURE
from src.experiments.diagnostics import run_gradcheck
from src.experiments.reporting import write_csv


@click.command()
@config_option
@out_option
@seed_option
@handle_errors
def gradcheck(config_path: Path, out_dir: Optional[Path], seed: Optional[int]):
    """Compare gradients analytiques et numériques ; code 0 si toutes les erreurs relatives ≤ tolérance."""
    config = load_config(config_path, seed, out_dir)
    report = run_gradcheck(config)
    write_csv(report.to_frame(), Path(config.out) / "gradcheck.csv", config.config_hash)
    for entry in report.entries:
        mark = "✅" if entry.passed else "❌"
        click.echo(f"{mark} {entry.name:<40} {entry.max_rel_error:.3e}")
    if not report.passed:
        click.echo(f"❌ gradcheck échoué (max {report.max_rel_error:.3e} > {report.tolerance:.0e})", err=True)
        raise SystemExit(EXIT_NUMERIC_FAILURE)
    click.echo(f"✅ gradcheck réussi (max {report.max_rel_error:.3e})")
