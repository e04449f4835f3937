# cli/commands/paramcount.py
"""Commande `paramcount` : effectifs gelés / entraînables / tête."""

from pathlib import Path
from typing import Optional

import click

from cli.commands.common import handle_errors, load_config
from src.models.encoder import EncoderConfig, PetlConfig, PetlKind, Placement, param_counts

REFERENCE_HEAD_CLASSES = 31


def _reference_rows():
    """Configurations à la taille d'AST : Single(r=24), Soft/Dense-MoA(14, 1, 1), Houlsby 7 + 7."""
    variants = [
        ("single r=24", PetlConfig(kind=PetlKind.SINGLE, r=24), Placement.PFEIFFER),
        ("soft_moa 14/1 r=1", PetlConfig(kind=PetlKind.SOFT_MOA, n_experts=14, slots_per_expert=1, r=1), Placement.PFEIFFER),
        ("dense_moa 14 r=1", PetlConfig(kind=PetlKind.DENSE_MOA, n_experts=14, r=1), Placement.PFEIFFER),
        ("soft_moa houlsby 7+7", PetlConfig(kind=PetlKind.SOFT_MOA, n_experts=14, r=1, houlsby_split=True), Placement.HOULSBY),
    ]
    for label, petl, placement in variants:
        yield label, param_counts(EncoderConfig.reference_shape(petl, n_classes=REFERENCE_HEAD_CLASSES, placement=placement))


@click.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Fichier RunConfig (facultatif avec --reference-shape).")
@click.option("--reference-shape", is_flag=True, help="Affiche les effectifs de référence (d=768, 12 couches, tête 31 classes).")
@handle_errors
def paramcount(config_path: Optional[Path], reference_shape: bool):
    """Compte les paramètres sans entraîner."""
    if config_path is None and not reference_shape:
        raise click.BadParameter("--config ou --reference-shape requis")
    if config_path is not None:
        config = load_config(config_path)
        counts = param_counts(config.encoder)
        click.echo(
            f"{config.encoder.petl.kind.value}: petl={counts['petl']} tête={counts['head']} "
            f"entraînables={counts['trainable']} gelés={counts['frozen']} total={counts['total']}"
        )
    if reference_shape:
        for label, counts in _reference_rows():
            click.echo(f"{label:<22} petl={counts['petl']:>8} tête={counts['head']:>6} avec tête={counts['trainable']:>8}")
