# src/training/optimizer.py
"""AdamW (décroissance de poids découplée) et planning cosinus.

La décroissance s'applique aux matrices entraînables (Φ et routeurs compris),
jamais aux biais. Les paramètres gelés n'ont pas de moments et ne sont jamais
modifiés.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.autograd import ParamRegistry, Tensor
from src.error_management import NumericError

logger = logging.getLogger(__name__)

_clamp_warned = False


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float = 0.0) -> float:
    """lr_min + ½(lr_max − lr_min)(1 + cos(π·step/total_steps)).

    Un pas au-delà de `total_steps` est ramené à lr_min, avec un seul
    avertissement par processus.
    """
    global _clamp_warned
    if total_steps <= 0:
        return lr_max
    if step > total_steps:
        if not _clamp_warned:
            logger.warning("lr_schedule_clamped", extra={"step": step, "total_steps": total_steps})
            _clamp_warned = True
        return lr_min
    step = max(step, 0)
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


class AdamWConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    weight_decay: float = Field(default=0.1, ge=0.0)


@dataclass
class OptimState:
    """Moments par paramètre entraînable et compteur de pas."""
    hparams: AdamWConfig
    step: int = 0
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Iterable[Tuple[str, Tensor]], hparams: AdamWConfig) -> "OptimState":
        state = cls(hparams=hparams)
        for name, tensor in params:
            state.exp_avg[name] = np.zeros_like(tensor.data)
            state.exp_avg_sq[name] = np.zeros_like(tensor.data)
        return state


def decays(tensor: Tensor) -> bool:
    return tensor.ndim >= 2


def adamw_step(state: OptimState, params: Iterable[Tuple[str, Tensor]], lr: float) -> None:
    """Un pas AdamW avec correction de biais, en place.

    Args:
        state: Moments et compteur (incrémenté ici).
        params: Couples (nom, tenseur) entraînables dont `grad` est renseigné.
        lr: Taux d'apprentissage du pas.

    Raises:
        NumericError: Si un gradient n'est pas fini ; aucun paramètre n'est alors modifié.
    """
    params = list(params)
    for name, tensor in params:
        if tensor.grad is None or not np.all(np.isfinite(tensor.grad)):
            raise NumericError("gradient absent ou non fini", parameter=name)

    hp = state.hparams
    state.step += 1
    bias1 = 1.0 - hp.beta1 ** state.step
    bias2 = 1.0 - hp.beta2 ** state.step
    for name, tensor in params:
        if name not in state.exp_avg:
            state.exp_avg[name] = np.zeros_like(tensor.data)
            state.exp_avg_sq[name] = np.zeros_like(tensor.data)
        m, v, g = state.exp_avg[name], state.exp_avg_sq[name], tensor.grad
        m *= hp.beta1
        m += (1.0 - hp.beta1) * g
        v *= hp.beta2
        v += (1.0 - hp.beta2) * g * g
        if hp.weight_decay and decays(tensor):
            tensor.data *= 1.0 - lr * hp.weight_decay
        tensor.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + hp.eps)


class AdamW:
    """Optimiseur lié aux paramètres entraînables d'un `ParamRegistry`."""

    def __init__(self, registry: ParamRegistry, hparams: AdamWConfig = AdamWConfig()) -> None:
        self.registry = registry
        self.state = OptimState.for_params(registry.trainable_items(), hparams)

    def zero_grad(self) -> None:
        self.registry.zero_grad()

    def step(self, lr: float) -> None:
        adamw_step(self.state, self.registry.trainable_items(), lr)
