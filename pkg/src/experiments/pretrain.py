# src/experiments/pretrain.py
"""Pré-entraînement du backbone sur la tâche source, puis mise en cache.

Le modèle `petl=none` est entraîné avec son backbone dégelé sur la variante
`source` de la tâche synthétique ; le checkpoint `backbone.smoa` du
répertoire de sortie est réutilisé tant que les dimensions de l'encodeur, la
graine et la tâche source n'ont pas changé.
"""

import logging
from pathlib import Path
from typing import Any, Dict

from src.data.synthetic import TaskVariant, generate, stratified_split
from src.error_management import ErrorContext
from src.experiments.run_config import BackboneMode, RunConfig
from src.models.checkpoint import load_backbone, read_checkpoint, save_checkpoint
from src.models.encoder import PetlConfig, PetlKind, SpectrogramEncoder
from src.training.trainer import TrainConfig, train

logger = logging.getLogger(__name__)

BACKBONE_FILE = "backbone.smoa"


def _backbone_key(config: RunConfig) -> Dict[str, Any]:
    enc = config.encoder.model_dump(mode="json", exclude={"petl", "placement"})
    return {
        "encoder_dims": enc, "seed": config.seed, "source_seed": config.task.source_seed,
        "samples_per_class": config.task.samples_per_class, "sigma": config.task.sigma,
        "epochs": config.backbone.epochs, "lr_max": config.backbone.lr_max,
    }


def pretrain_backbone(config: RunConfig) -> Path:
    """Retourne le chemin d'un backbone pré-entraîné (le produit au besoin)."""
    if config.backbone.path is not None:
        return config.backbone.path
    path = Path(config.out) / BACKBONE_FILE
    key = _backbone_key(config)
    if path.exists() and read_checkpoint(path).metadata.get("backbone_key") == key:
        logger.info("backbone_cache_hit", extra={"path": str(path)})
        return path

    source_cfg = config.encoder.model_copy(update={"petl": PetlConfig(kind=PetlKind.NONE)})
    model = SpectrogramEncoder(source_cfg, seed=config.seed)
    model.unfreeze_backbone()
    dataset = generate(config.task_spec(config.task.source_seed, TaskVariant.SOURCE))
    train_set, test_set = stratified_split(dataset, config.task.test_fraction, seed=config.task.source_seed)
    train_cfg = TrainConfig(
        epochs=config.backbone.epochs, batch_size=config.backbone.batch_size,
        lr_max=config.backbone.lr_max, seed=config.seed,
    )
    with ErrorContext("pretrain_backbone", source_seed=config.task.source_seed):
        result = train(model, train_set, train_cfg, eval_set=test_set if len(test_set) else None)
    model.freeze_backbone()
    save_checkpoint(model, path, metadata={"backbone_key": key, "source_accuracy": result.eval_accuracy})
    logger.info("backbone_pretrained", extra={"path": str(path), "source_accuracy": result.eval_accuracy})
    return path


def build_model(config: RunConfig) -> SpectrogramEncoder:
    """Encodeur de la configuration, avec backbone pré-entraîné si demandé."""
    model = SpectrogramEncoder(config.encoder, seed=config.seed)
    if config.backbone.mode is BackboneMode.PRETRAINED:
        load_backbone(model, pretrain_backbone(config))
    return model
