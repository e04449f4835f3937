# src/training/trainer.py
"""Boucle de fine-tuning à backbone gelé.

Déterministe à graine fixe : permutation des échantillons tirée de
`(seed, epoch)`, planning cosinus par pas, AdamW sur les seuls paramètres
entraînables. Le journal (pandas) contient une ligne par pas (`kind=train`)
et une ligne par évaluation (`kind=eval`).
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.autograd import cross_entropy
from src.data.synthetic import SpectrogramDataset
from src.error_management import ContractError, ValidationError
from src.models.encoder import SpectrogramEncoder
from src.training.optimizer import AdamW, AdamWConfig, cosine_lr

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["step", "loss", "lr", "step_ms", "kind", "accuracy"]


class TrainConfig(BaseModel):
    """Hyperparamètres d'entraînement.

    Attributes:
        epochs: Nombre d'époques.
        batch_size: Taille de lot.
        lr_max: Taux initial du planning cosinus.
        lr_min: Taux final.
        weight_decay: Décroissance découplée (matrices seulement).
        seed: Graine des permutations.
        eval_every: Cadence d'évaluation en pas (0 : fin de chaque époque).
        max_steps: Borne optionnelle sur le nombre total de pas.
    """
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=30, ge=1)
    batch_size: int = Field(default=16, ge=1)
    lr_max: float = Field(default=5e-3, ge=0.0)
    lr_min: float = Field(default=0.0, ge=0.0)
    weight_decay: float = Field(default=0.1, ge=0.0)
    seed: int = Field(default=0, ge=0)
    eval_every: int = Field(default=0, ge=0)
    max_steps: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_lr(self) -> "TrainConfig":
        if self.lr_min > self.lr_max:
            raise ValueError(f"lr_min={self.lr_min} > lr_max={self.lr_max}")
        return self

    def total_steps(self, n_samples: int) -> int:
        steps = self.epochs * math.ceil(n_samples / self.batch_size)
        return min(steps, self.max_steps) if self.max_steps else steps


@dataclass
class EvalResult:
    accuracy: float
    loss: float
    n_samples: int


@dataclass
class TrainResult:
    log: pd.DataFrame
    steps: int
    final_loss: float
    train_accuracy: float
    eval_accuracy: Optional[float]
    frozen_digest: str


def evaluate(model: SpectrogramEncoder, dataset: SpectrogramDataset, batch_size: int = 64) -> EvalResult:
    """Exactitude top-1 et perte moyenne sur `dataset`."""
    if len(dataset) == 0:
        raise ValidationError("jeu d'évaluation vide")
    correct, total_loss = 0, 0.0
    for specs, labels in dataset.batches(batch_size):
        logits = model.forward(specs)
        total_loss += cross_entropy(logits, labels).item() * len(labels)
        correct += int(np.sum(np.argmax(logits.data, axis=-1) == labels))
    return EvalResult(accuracy=correct / len(dataset), loss=total_loss / len(dataset), n_samples=len(dataset))


def train(
        model: SpectrogramEncoder,
        dataset: SpectrogramDataset,
        cfg: TrainConfig,
        eval_set: Optional[SpectrogramDataset] = None,
) -> TrainResult:
    """Entraîne les paramètres entraînables de `model` sur `dataset`.

    Args:
        model: Encodeur partitionné (backbone gelé ou non).
        dataset: Jeu d'entraînement.
        cfg: Hyperparamètres.
        eval_set: Jeu évalué à la cadence `eval_every` ; le jeu d'entraînement sinon.

    Returns:
        Le journal et les exactitudes finales.

    Raises:
        ValidationError: Si le jeu d'entraînement est vide.
        NumericError: Si un gradient devient non fini.
        ContractError: Si un paramètre gelé a changé pendant l'entraînement.
    """
    if len(dataset) == 0:
        raise ValidationError("jeu d'entraînement vide")
    eval_set = eval_set if eval_set is not None else dataset
    optimizer = AdamW(model.registry, AdamWConfig(weight_decay=cfg.weight_decay))
    digest = model.registry.frozen_digest()
    total = cfg.total_steps(len(dataset))
    per_epoch = math.ceil(len(dataset) / cfg.batch_size)
    eval_every = cfg.eval_every or per_epoch
    logger.info(
        "train_started",
        extra={"steps": total, "trainable": model.registry.count(trainable=True), "n_samples": len(dataset)},
    )

    rows = []
    step, loss_value = 0, float("nan")
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(dataset))
        for specs, labels in dataset.batches(cfg.batch_size, order):
            if step >= total:
                break
            lr = cosine_lr(step, total, cfg.lr_max, cfg.lr_min)
            started = time.perf_counter()
            optimizer.zero_grad()
            loss = model.loss(specs, labels)
            loss.backward()
            optimizer.step(lr)
            step_ms = (time.perf_counter() - started) * 1000.0
            loss_value = loss.item()
            step += 1
            rows.append({"step": step, "loss": loss_value, "lr": lr, "step_ms": step_ms, "kind": "train", "accuracy": np.nan})
            logger.debug("train_step", extra={"step": step, "loss": loss_value, "lr": lr, "step_ms": step_ms})
            if step % eval_every == 0 or step == total:
                result = evaluate(model, eval_set)
                rows.append({"step": step, "loss": result.loss, "lr": lr, "step_ms": np.nan, "kind": "eval", "accuracy": result.accuracy})
                logger.info("eval", extra={"step": step, "epoch": epoch, "accuracy": result.accuracy, "loss": result.loss})

    if model.registry.frozen_digest() != digest:
        raise ContractError("un paramètre gelé a été modifié pendant l'entraînement")

    train_acc = evaluate(model, dataset).accuracy
    log = pd.DataFrame(rows, columns=LOG_COLUMNS)
    evals = log[log["kind"] == "eval"]
    eval_acc = float(evals["accuracy"].iloc[-1]) if len(evals) else None
    logger.info("train_finished", extra={"steps": step, "final_loss": loss_value, "train_accuracy": train_acc})
    return TrainResult(log=log, steps=step, final_loss=loss_value, train_accuracy=train_acc,
                       eval_accuracy=eval_acc, frozen_digest=digest)
