"""Entraînement à backbone gelé : AdamW, planning cosinus, boucle déterministe."""
from .optimizer import AdamW, AdamWConfig, OptimState, adamw_step, cosine_lr
from .trainer import EvalResult, TrainConfig, TrainResult, evaluate, train

__all__ = [
    "AdamW", "AdamWConfig", "OptimState", "adamw_step", "cosine_lr",
    "EvalResult", "TrainConfig", "TrainResult", "evaluate", "train",
]
