# cli/commands/analyze.py
"""Commande `analyze` : contributions des experts d'un checkpoint Soft-MoA."""

from pathlib import Path
from typing import Optional

import click

from cli.commands.common import config_option, handle_errors, load_config, out_option, seed_option
from src.experiments.adaptation import prepare_task
from src.experiments.analysis import analyze_contributions
from src.experiments.reporting import write_csv
from src.experiments.run_config import parse_layer_selector
from src.models.checkpoint import load_checkpoint


@click.command()
@config_option
@out_option
@seed_option
@click.option("--checkpoint", "checkpoint_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Checkpoint SMOA1 (défaut : <out>/model.smoa).")
@click.option("--layers", default=None, help="Couches analysées : `all`, `0,2` ou `1-3`.")
@handle_errors
def analyze(config_path: Path, out_dir: Optional[Path], seed: Optional[int], checkpoint_path: Optional[Path], layers: Optional[str]):
    """Écrit `contributions_layers.csv` et `contributions_classes.csv`."""
    config = load_config(config_path, seed, out_dir)
    out = Path(config.out)
    checkpoint_path = checkpoint_path or out / "model.smoa"
    if not checkpoint_path.exists():
        raise click.BadParameter(f"checkpoint introuvable : {checkpoint_path}", param_hint="--checkpoint")
    model, _ = load_checkpoint(checkpoint_path)
    selected = parse_layer_selector(layers or config.analyze.layers, model.config.n_layers)
    _, test_set = prepare_task(config, config.task.seeds[0])
    report = analyze_contributions(model, test_set, selected)
    write_csv(report.layers, out / "contributions_layers.csv", config.config_hash)
    write_csv(report.classes, out / "contributions_classes.csv", config.config_hash)
    for block, group in report.layers.groupby("block", sort=False):
        values = " ".join(f"{v:.3f}" for v in group["contribution"])
        click.echo(f"{block:<24} {values}")
