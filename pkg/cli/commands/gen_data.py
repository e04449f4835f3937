# cli/commands/gen_data.py
"""Commande `gen-data` : écrit la tâche synthétique au format SMDS1."""

from pathlib import Path
from typing import Optional

import click

from cli.commands.common import config_option, handle_errors, load_config, seed_option
from src.data.dataset_io import save_dataset
from src.data.synthetic import TaskVariant, generate


@click.command(name="gen-data")
@config_option
@seed_option
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Fichier SMDS1 produit.")
@click.option("--source", is_flag=True, help="Génère la tâche source (pré-entraînement) au lieu de la tâche cible.")
@handle_errors
def gen_data(config_path: Path, seed: Optional[int], out_file: Path, source: bool):
    """Génère la tâche de la première graine de `task.seeds` (ou `task.source_seed` avec --source)."""
    config = load_config(config_path, seed)
    if source:
        spec = config.task_spec(config.task.source_seed, TaskVariant.SOURCE)
    else:
        spec = config.task_spec(config.task.seeds[0])
    dataset = generate(spec)
    save_dataset(dataset, out_file)
    click.echo(f"✅ {len(dataset)} échantillons ({spec.variant.value}) écrits dans {out_file}")
