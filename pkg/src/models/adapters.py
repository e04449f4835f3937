# src/models/adapters.py
"""Adaptateur bottleneck : l'« expert » du laboratoire.

Un adaptateur projette les tokens de largeur d vers un goulot r, applique une
non-linéarité puis re-projette vers d. Il sert seul (variante Single) ou comme
unité experte des blocs Dense-MoA et Soft-MoA. Il n'a pas de résiduel
interne : la connexion parallèle de l'encodeur fournit le chemin direct.
"""

from enum import Enum
from typing import Callable, Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.autograd import ParamRegistry, Tensor, gelu, relu
from src.autograd.functional import identity
from src.bench.counters import record_expert
from src.error_management import DimensionError, ValidationError

INIT_STD = 0.02


class Activation(str, Enum):
    """Non-linéarité entre les deux projections (`linear` sert aux oracles de test)."""
    GELU = "gelu"
    RELU = "relu"
    LINEAR = "linear"


class ExpertKind(str, Enum):
    BOTTLENECK = "bottleneck"


class InitScheme(str, Enum):
    """`zero_up` : W_up = b_up = 0 (transparence au pas 0) ; `random` : tout aléatoire."""
    ZERO_UP = "zero_up"
    RANDOM = "random"


class AdapterConfig(BaseModel):
    """Configuration d'un adaptateur.

    Attributes:
        r: Dimension du goulot (bottleneck).
        activation: Non-linéarité appliquée entre les projections.
        init: Schéma d'initialisation.
        kind: Type d'expert (une seule variante aujourd'hui).
    """
    model_config = ConfigDict(extra="forbid")

    r: int = Field(default=1, ge=1)
    activation: Activation = Activation.GELU
    init: InitScheme = InitScheme.ZERO_UP
    kind: ExpertKind = ExpertKind.BOTTLENECK


_ACTIVATIONS: Dict[Activation, Callable[[Tensor], Tensor]] = {
    Activation.GELU: gelu,
    Activation.RELU: relu,
    Activation.LINEAR: identity,
}


class BottleneckAdapter:
    """Paramètres W_down (d×r), b_down (r), W_up (r×d), b_up (d) et activation."""

    def __init__(self, d: int, cfg: AdapterConfig, rng: Optional[np.random.Generator] = None) -> None:
        if not 1 <= cfg.r <= d:
            raise ValidationError(f"goulot r={cfg.r} invalide pour d={d} (1 ≤ r ≤ d)")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d = d
        self.r = cfg.r
        self.activation = cfg.activation
        self.w_down = Tensor(rng.normal(0.0, INIT_STD, size=(d, cfg.r)))
        self.b_down = Tensor(np.zeros(cfg.r))
        if cfg.init is InitScheme.RANDOM:
            self.w_up = Tensor(rng.normal(0.0, INIT_STD, size=(cfg.r, d)))
            self.b_up = Tensor(rng.normal(0.0, INIT_STD, size=d))
        else:
            self.w_up = Tensor(np.zeros((cfg.r, d)))
            self.b_up = Tensor(np.zeros(d))

    @classmethod
    def from_weights(cls, w_down, b_down, w_up, b_up, activation: Activation = Activation.GELU) -> "BottleneckAdapter":
        """Construit un adaptateur à partir de poids explicites (oracles, tests)."""
        w_down = np.asarray(w_down, dtype=np.float64)
        d, r = w_down.shape
        adapter = cls(d, AdapterConfig(r=r, activation=activation))
        adapter.w_down.data[...] = w_down
        adapter.b_down.data[...] = b_down
        adapter.w_up.data[...] = w_up
        adapter.b_up.data[...] = b_up
        return adapter

    def parameters(self) -> Dict[str, Tensor]:
        return {"w_down": self.w_down, "b_down": self.b_down, "w_up": self.w_up, "b_up": self.b_up}

    def register(self, registry: ParamRegistry, prefix: str, trainable: bool = True) -> None:
        for name, tensor in self.parameters().items():
            registry.register(f"{prefix}.{name}", tensor, trainable)

    @property
    def param_count(self) -> int:
        return sum(t.size for t in self.parameters().values())

    def __call__(self, x: Tensor) -> Tensor:
        return adapter_forward(self, x)


def adapter_forward(adapter: BottleneckAdapter, x: Tensor) -> Tensor:
    """`W_up·σ(X·W_down + b_down) + b_up`, ligne par ligne.

    Raises:
        DimensionError: Si la dernière dimension de `x` n'est pas d.
    """
    if x.ndim < 2 or x.shape[-1] != adapter.d:
        raise DimensionError(f"adaptateur : {adapter.d} colonnes attendues", x.shape, (adapter.d, adapter.r))
    rows = int(np.prod(x.shape[:-1]))
    record_expert(rows, adapter.d, adapter.r)
    hidden = _ACTIVATIONS[adapter.activation](x @ adapter.w_down + adapter.b_down)
    return hidden @ adapter.w_up + adapter.b_up


def adapter_param_count(cfg: AdapterConfig, d: int) -> int:
    """d·r + r + r·d + d."""
    return d * cfg.r + cfg.r + cfg.r * d + d
