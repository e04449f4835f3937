# cli/commands/train.py
"""Commande `train` : adaptation d'un encodeur gelé sur une ou plusieurs tâches.

Produit dans le répertoire de sortie `train_log.csv`, `summary.csv` et un
checkpoint SMOA1 par tâche.
"""

from pathlib import Path
from typing import Optional

import click

from cli.commands.common import config_option, handle_errors, load_config, out_option, seed_option
from src.experiments.adaptation import run_experiment
from src.experiments.reporting import write_csv


@click.command()
@config_option
@out_option
@seed_option
@handle_errors
def train(config_path: Path, out_dir: Optional[Path], seed: Optional[int]):
    """Entraîne la variante PETL de la configuration et écrit journal, résumé et checkpoint."""
    config = load_config(config_path, seed, out_dir)
    click.echo(f"🚀 Entraînement {config.encoder.petl.kind.value} (hash {config.config_hash})")
    outcome = run_experiment(config)
    out = Path(config.out)
    write_csv(outcome.log, out / "train_log.csv", config.config_hash)
    write_csv(outcome.summary, out / "summary.csv", config.config_hash)
    for row in outcome.summary.itertuples():
        click.echo(
            f"✅ tâche {row.task} : test={row.test_accuracy:.4f} train={row.train_accuracy:.4f} "
            f"entraînables={row.trainable_params}"
        )
    click.echo(f"Résultats écrits dans {out}")
