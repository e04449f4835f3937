# src/experiments/adaptation.py
"""Runs d'adaptation : une tâche par graine, journal, checkpoint et résumé.

Avec plusieurs graines (`task.seeds`), le résumé comporte une ligne par tâche
et une ligne `avg` (moyenne des exactitudes).
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.data.dataset_io import load_dataset
from src.data.synthetic import SpectrogramDataset, generate, stratified_split
from src.error_management import ConfigError, ErrorContext
from src.experiments.pretrain import build_model
from src.experiments.run_config import RunConfig
from src.models.checkpoint import save_checkpoint
from src.models.encoder import SpectrogramEncoder
from src.training.trainer import TrainResult, evaluate, train

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "task", "petl", "placement", "train_accuracy", "test_accuracy", "final_loss", "steps",
    "trainable_params", "petl_params", "head_params", "total_params", "trainable_fraction",
]


@dataclass
class TaskRun:
    task: str
    model: SpectrogramEncoder
    result: TrainResult
    test_accuracy: float
    checkpoint: Optional[Path] = None


@dataclass
class ExperimentOutcome:
    runs: List[TaskRun] = field(default_factory=list)
    summary: pd.DataFrame = field(default_factory=pd.DataFrame)
    log: pd.DataFrame = field(default_factory=pd.DataFrame)


def _check_loaded(dataset: SpectrogramDataset, config: RunConfig, key: str) -> SpectrogramDataset:
    enc = config.encoder
    expected = (enc.n_classes, enc.n_freq, enc.n_frames)
    found = (dataset.n_classes, *dataset.shape)
    if found != expected:
        raise ConfigError(
            f"jeu chargé (n_classes, F, T) = {found} incompatible avec l'encodeur {expected}", key=key
        )
    return dataset


def prepare_task(config: RunConfig, seed: int) -> Tuple[SpectrogramDataset, SpectrogramDataset]:
    """(train, test) : fichiers SMDS1 si `dataset.path` est renseigné, tâche synthétique sinon.

    Raises:
        ConfigError: Si un fichier chargé ne correspond pas à l'encodeur (classes ou forme F×T).
    """
    if config.dataset.path is not None:
        dataset = _check_loaded(load_dataset(config.dataset.path), config, "dataset.path")
        if config.dataset.test_path is not None:
            return dataset, _check_loaded(load_dataset(config.dataset.test_path), config, "dataset.test_path")
    else:
        dataset = generate(config.task_spec(seed))
    return stratified_split(dataset, config.task.test_fraction, seed=seed)


def summarize(model: SpectrogramEncoder, task: str, result: TrainResult, test_accuracy: float) -> Dict[str, object]:
    registry = model.registry
    trainable = registry.count(trainable=True)
    head = registry.count(prefix="head.")
    total = registry.count()
    return {
        "task": task,
        "petl": model.config.petl.kind.value,
        "placement": model.config.placement.value,
        "train_accuracy": result.train_accuracy,
        "test_accuracy": test_accuracy,
        "final_loss": result.final_loss,
        "steps": result.steps,
        "trainable_params": trainable,
        "petl_params": trainable - head,
        "head_params": head,
        "total_params": total,
        "trainable_fraction": trainable / total,
    }


def run_task(config: RunConfig, seed: int, checkpoint: Optional[Path] = None) -> TaskRun:
    """Entraîne un modèle neuf sur la tâche `seed` et l'évalue sur sa partie test."""
    train_set, test_set = prepare_task(config, seed)
    model = build_model(config)
    with ErrorContext("run_task", task_seed=seed, config_hash=config.config_hash):
        result = train(model, train_set, config.train, eval_set=test_set if len(test_set) else None)
    test_accuracy = evaluate(model, test_set).accuracy if len(test_set) else float("nan")
    if checkpoint is not None:
        save_checkpoint(model, checkpoint, metadata={"config_hash": config.config_hash, "task_seed": seed})
    return TaskRun(task=str(seed), model=model, result=result, test_accuracy=test_accuracy, checkpoint=checkpoint)


def run_experiment(config: RunConfig, save: bool = True) -> ExperimentOutcome:
    """Exécute toutes les tâches de `task.seeds` et agrège journal et résumé."""
    seeds = config.task.seeds if config.dataset.path is None else config.task.seeds[:1]
    outcome = ExperimentOutcome()
    rows, logs = [], []
    for seed in seeds:
        name = "model.smoa" if len(seeds) == 1 else f"model_task{seed}.smoa"
        run = run_task(config, seed, checkpoint=Path(config.out) / name if save else None)
        outcome.runs.append(run)
        rows.append(summarize(run.model, run.task, run.result, run.test_accuracy))
        log = run.result.log.copy()
        log.insert(0, "task", run.task)
        logs.append(log)
        logger.info("task_finished", extra={"task": run.task, "test_accuracy": run.test_accuracy})

    summary = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    if len(rows) > 1:
        avg = dict(rows[0])
        avg.update({
            "task": "avg",
            "train_accuracy": float(np.mean([r["train_accuracy"] for r in rows])),
            "test_accuracy": float(np.mean([r["test_accuracy"] for r in rows])),
            "final_loss": float(np.mean([r["final_loss"] for r in rows])),
        })
        summary = pd.concat([summary, pd.DataFrame([avg], columns=SUMMARY_COLUMNS)], ignore_index=True)
    outcome.summary = summary
    outcome.log = pd.concat(logs, ignore_index=True)
    return outcome
