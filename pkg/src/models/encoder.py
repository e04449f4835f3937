# src/models/encoder.py
"""Encodeur de spectrogrammes à l'échelle du bureau (analogue d'AST).

Chaîne : découpage en patchs → projection linéaire + embedding positionnel
(gelés) → n_layers couches pré-normalisées MHSA + FFN (gelées) → moyenne sur
les tokens → tête linéaire (entraînable).

Les blocs PETL (adaptateur seul, Dense-MoA ou Soft-MoA) sont placés en
parallèle :
- Pfeiffer : h = X + MHSA(LN₁X) + PETL(LN₁X) ; out = h + FFN(LN₂h)
- Houlsby  : idem, plus out = h + FFN(LN₂h) + PETL₂(LN₂h)

Le bloc PETL consomme l'entrée normalisée de la sous-couche ; l'ordre des
additions est fixe pour que des adaptateurs initialisés à zéro laissent les
logits du backbone strictement inchangés.
"""

import logging
import math
from collections import OrderedDict
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.autograd import (
    ParamRegistry, Tensor, cross_entropy, feed_forward, layernorm, self_attention, softmax_axis, swap_last,
)
from src.error_management import DimensionError, ValidationError
from src.models.adapters import Activation, AdapterConfig, BottleneckAdapter, InitScheme, INIT_STD, adapter_param_count
from src.models.moa import DenseMoaLayer, RoutingTrace, SoftMoaLayer

logger = logging.getLogger(__name__)

FFN_EXPANSION = 4

PetlBlock = Union[BottleneckAdapter, DenseMoaLayer, SoftMoaLayer]


# ------------------------------------------------------------------
# Configuration
# ------------------------------------------------------------------
class Placement(str, Enum):
    PFEIFFER = "pfeiffer"
    HOULSBY = "houlsby"


class PetlKind(str, Enum):
    """`none` correspond au linear probing (tête seule)."""
    NONE = "none"
    SINGLE = "single"
    DENSE_MOA = "dense_moa"
    SOFT_MOA = "soft_moa"


class PetlConfig(BaseModel):
    """Variante PETL attachée à chaque couche.

    Attributes:
        kind: Variante (`none`, `single`, `dense_moa`, `soft_moa`).
        n_experts: N, nombre d'adaptateurs experts (MoA).
        slots_per_expert: p, slots par expert (Soft-MoA).
        r: Goulot de chaque adaptateur.
        activation: Non-linéarité des adaptateurs.
        init: Schéma d'initialisation des adaptateurs.
        houlsby_split: En Houlsby, répartit les N experts moitié MHSA / moitié FFN.
    """
    model_config = ConfigDict(extra="forbid")

    kind: PetlKind = PetlKind.SOFT_MOA
    n_experts: int = Field(default=14, ge=1)
    slots_per_expert: int = Field(default=1, ge=1)
    r: int = Field(default=1, ge=1)
    activation: Activation = Activation.GELU
    init: InitScheme = InitScheme.ZERO_UP
    houlsby_split: bool = False

    def adapter_config(self) -> AdapterConfig:
        return AdapterConfig(r=self.r, activation=self.activation, init=self.init)

    @property
    def is_moa(self) -> bool:
        return self.kind in (PetlKind.DENSE_MOA, PetlKind.SOFT_MOA)


class EncoderConfig(BaseModel):
    """Dimensions de l'encodeur, variante PETL et nombre de classes."""
    model_config = ConfigDict(extra="forbid")

    d: int = Field(default=64, ge=1)
    n_layers: int = Field(default=4, ge=1)
    n_heads: int = Field(default=4, ge=1)
    patch_f: int = Field(default=8, ge=1)
    patch_t: int = Field(default=8, ge=1)
    n_freq: int = Field(default=32, ge=1)
    n_frames: int = Field(default=128, ge=1)
    placement: Placement = Placement.PFEIFFER
    petl: PetlConfig = Field(default_factory=PetlConfig)
    n_classes: int = Field(default=10, ge=2)

    @model_validator(mode="after")
    def _check_dims(self) -> "EncoderConfig":
        if self.d % self.n_heads:
            raise ValueError(f"d={self.d} non divisible par n_heads={self.n_heads}")
        if self.n_freq % self.patch_f or self.n_frames % self.patch_t:
            raise ValueError(
                f"patch {self.patch_f}×{self.patch_t} ne divise pas le spectrogramme {self.n_freq}×{self.n_frames}"
            )
        if self.petl.kind is not PetlKind.NONE and self.petl.r > self.d:
            raise ValueError(f"goulot r={self.petl.r} > d={self.d}")
        if self.petl.houlsby_split:
            if self.placement is not Placement.HOULSBY or not self.petl.is_moa:
                raise ValueError("houlsby_split exige placement=houlsby et une variante MoA")
            if self.petl.n_experts % 2:
                raise ValueError(f"houlsby_split exige N pair (N={self.petl.n_experts})")
        return self

    @property
    def n_tokens(self) -> int:
        return (self.n_freq // self.patch_f) * (self.n_frames // self.patch_t)

    @property
    def patch_size(self) -> int:
        return self.patch_f * self.patch_t

    @property
    def experts_per_block(self) -> int:
        return self.petl.n_experts // 2 if self.petl.houlsby_split else self.petl.n_experts

    def petl_sites(self) -> List[str]:
        """Sous-couches recevant un bloc PETL (`attn`, puis `ffn` en Houlsby)."""
        if self.petl.kind is PetlKind.NONE:
            return []
        return ["attn", "ffn"] if self.placement is Placement.HOULSBY else ["attn"]

    @classmethod
    def reference_shape(cls, petl: PetlConfig, n_classes: int = 31, placement: Placement = Placement.PFEIFFER) -> "EncoderConfig":
        """Configuration à la taille d'AST (d=768, 12 couches), réservée au comptage des paramètres."""
        return cls(
            d=768, n_layers=12, n_heads=12, patch_f=16, patch_t=16, n_freq=128, n_frames=1024,
            placement=placement, petl=petl, n_classes=n_classes,
        )


# ------------------------------------------------------------------
# Inventaire des paramètres
# ------------------------------------------------------------------
def _petl_block_shapes(cfg: EncoderConfig, n_experts: int) -> List[Tuple[str, Tuple[int, ...]]]:
    d, r = cfg.d, cfg.petl.r
    adapter = [("w_down", (d, r)), ("b_down", (r,)), ("w_up", (r, d)), ("b_up", (d,))]
    if cfg.petl.kind is PetlKind.SINGLE:
        return adapter
    if cfg.petl.kind is PetlKind.DENSE_MOA:
        shapes = [("router", (d, n_experts))]
    else:
        shapes = [("phi", (d, n_experts * cfg.petl.slots_per_expert))]
    for i in range(n_experts):
        shapes += [(f"experts.{i}.{k}", s) for k, s in adapter]
    return shapes


def param_shapes(cfg: EncoderConfig) -> "OrderedDict[str, Tuple[Tuple[int, ...], bool]]":
    """Inventaire (nom → (forme, entraînable)) dans l'ordre d'enregistrement du modèle.

    Ne matérialise aucun tenseur : sert au comptage pour la configuration AST.
    """
    d, hidden = cfg.d, FFN_EXPANSION * cfg.d
    out: "OrderedDict[str, Tuple[Tuple[int, ...], bool]]" = OrderedDict()
    out["patch.w"] = ((cfg.patch_size, d), False)
    out["patch.b"] = ((d,), False)
    out["pos"] = ((cfg.n_tokens, d), False)
    for i in range(cfg.n_layers):
        prefix = f"layers.{i}"
        backbone = [
            ("ln1.gamma", (d,)), ("ln1.beta", (d,)),
            ("attn.wq", (d, d)), ("attn.bq", (d,)), ("attn.wk", (d, d)), ("attn.bk", (d,)),
            ("attn.wv", (d, d)), ("attn.bv", (d,)), ("attn.wo", (d, d)), ("attn.bo", (d,)),
            ("ln2.gamma", (d,)), ("ln2.beta", (d,)),
            ("ffn.w1", (d, hidden)), ("ffn.b1", (hidden,)), ("ffn.w2", (hidden, d)), ("ffn.b2", (d,)),
        ]
        for name, shape in backbone:
            out[f"{prefix}.{name}"] = (shape, False)
        for site in cfg.petl_sites():
            for name, shape in _petl_block_shapes(cfg, cfg.experts_per_block):
                out[f"{prefix}.petl_{site}.{name}"] = (shape, True)
    out["head.w"] = ((d, cfg.n_classes), True)
    out["head.b"] = ((cfg.n_classes,), True)
    return out


def param_partition(cfg: EncoderConfig) -> Tuple[List[str], List[str]]:
    """Retourne (noms gelés, noms entraînables) ; déterministe."""
    shapes = param_shapes(cfg)
    frozen = [n for n, (_, trainable) in shapes.items() if not trainable]
    trainable = [n for n, (_, t) in shapes.items() if t]
    return frozen, trainable


def param_counts(cfg: EncoderConfig) -> Dict[str, int]:
    """Effectifs gelés / entraînables / tête / PETL, sans matérialiser le modèle."""
    counts = {"frozen": 0, "trainable": 0, "head": 0, "petl": 0}
    for name, (shape, trainable) in param_shapes(cfg).items():
        size = int(np.prod(shape))
        counts["trainable" if trainable else "frozen"] += size
        if name.startswith("head."):
            counts["head"] += size
        elif trainable:
            counts["petl"] += size
    counts["total"] = counts["frozen"] + counts["trainable"]
    return counts


def petl_block_param_count(cfg: EncoderConfig) -> int:
    """Paramètres d'un bloc PETL (formule fermée, cohérente avec `moa_param_count`)."""
    if cfg.petl.kind is PetlKind.NONE:
        return 0
    adapter = adapter_param_count(cfg.petl.adapter_config(), cfg.d)
    if cfg.petl.kind is PetlKind.SINGLE:
        return adapter
    n = cfg.experts_per_block
    routing = cfg.d * n * (cfg.petl.slots_per_expert if cfg.petl.kind is PetlKind.SOFT_MOA else 1)
    return n * adapter + routing


# ------------------------------------------------------------------
# Sous-couches
# ------------------------------------------------------------------
def _normal(rng: np.random.Generator, shape: Tuple[int, ...]) -> Tensor:
    return Tensor(rng.normal(0.0, INIT_STD, size=shape))


class PatchEmbedding:
    """Projection linéaire des patchs aplatis + embedding positionnel appris (gelés)."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator) -> None:
        self.patch_f, self.patch_t = cfg.patch_f, cfg.patch_t
        self.w = _normal(rng, (cfg.patch_size, cfg.d))
        self.b = Tensor(np.zeros(cfg.d))
        self.pos = _normal(rng, (cfg.n_tokens, cfg.d))

    def parameters(self) -> Dict[str, Tensor]:
        return {"patch.w": self.w, "patch.b": self.b, "pos": self.pos}


def extract_patches(specs: np.ndarray, patch_f: int, patch_t: int) -> np.ndarray:
    """Découpe `B×F×T` en `B×L×(f_p·t_p)`, patchs ordonnés fréquence puis temps.

    Raises:
        ValidationError: Si F ou T n'est pas divisible par la taille de patch.
    """
    specs = np.asarray(specs, dtype=np.float64)
    if specs.ndim == 2:
        specs = specs[None]
    if specs.ndim != 3:
        raise DimensionError("spectrogrammes B×F×T attendus", specs.shape)
    b, f, t = specs.shape
    if f % patch_f or t % patch_t:
        raise ValidationError(f"dimensions non divisibles : F={f}, T={t}, patch={patch_f}×{patch_t}")
    blocks = specs.reshape(b, f // patch_f, patch_f, t // patch_t, patch_t).transpose(0, 1, 3, 2, 4)
    return blocks.reshape(b, (f // patch_f) * (t // patch_t), patch_f * patch_t)


def patchify(specs: np.ndarray, embedding: PatchEmbedding) -> Tensor:
    """`B×F×T` → tokens `B×L×d` (patch · W + b + pos)."""
    patches = extract_patches(specs, embedding.patch_f, embedding.patch_t)
    if patches.shape[1] != embedding.pos.shape[0]:
        raise DimensionError("nombre de tokens incompatible avec l'embedding positionnel", patches.shape, embedding.pos.shape)
    return Tensor(patches) @ embedding.w + embedding.b + embedding.pos


class MultiHeadSelfAttention:
    """MHSA à n_heads têtes ; projections Q, K, V, O avec biais."""

    def __init__(self, d: int, n_heads: int, rng: np.random.Generator) -> None:
        self.d, self.n_heads = d, n_heads
        self.head_dim = d // n_heads
        self.wq, self.wk, self.wv, self.wo = (_normal(rng, (d, d)) for _ in range(4))
        self.bq, self.bk, self.bv, self.bo = (Tensor(np.zeros(d)) for _ in range(4))

    def parameters(self) -> Dict[str, Tensor]:
        return {
            "attn.wq": self.wq, "attn.bq": self.bq, "attn.wk": self.wk, "attn.bk": self.bk,
            "attn.wv": self.wv, "attn.bv": self.bv, "attn.wo": self.wo, "attn.bo": self.bo,
        }

    def _split_heads(self, x: Tensor) -> Tensor:
        b, l, _ = x.shape
        return x.reshape(b, l, self.n_heads, self.head_dim).transpose(0, 2, 1, 3)

    def attention_probs(self, x: Tensor) -> Tensor:
        """Probabilités d'attention `B×H×L×L` ; chaque ligne somme à 1."""
        q = self._split_heads(x @ self.wq + self.bq)
        k = self._split_heads(x @ self.wk + self.bk)
        scores = (q @ swap_last(k)) * (1.0 / math.sqrt(self.head_dim))
        return softmax_axis(scores, axis=-1)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[-1] != self.d:
            raise DimensionError(f"MHSA : entrée B×L×{self.d} attendue", x.shape)
        return self_attention(
            x, self.wq, self.bq, self.wk, self.bk, self.wv, self.bv, self.wo, self.bo, n_heads=self.n_heads,
        )


class FeedForward:
    """FFN d → 4d → d avec GELU."""

    def __init__(self, d: int, rng: np.random.Generator) -> None:
        hidden = FFN_EXPANSION * d
        self.w1, self.b1 = _normal(rng, (d, hidden)), Tensor(np.zeros(hidden))
        self.w2, self.b2 = _normal(rng, (hidden, d)), Tensor(np.zeros(d))

    def parameters(self) -> Dict[str, Tensor]:
        return {"ffn.w1": self.w1, "ffn.b1": self.b1, "ffn.w2": self.w2, "ffn.b2": self.b2}

    def __call__(self, x: Tensor) -> Tensor:
        return feed_forward(x, self.w1, self.b1, self.w2, self.b2)


class LayerNorm:
    def __init__(self, d: int, prefix: str) -> None:
        self.prefix = prefix
        self.gamma = Tensor(np.ones(d))
        self.beta = Tensor(np.zeros(d))

    def parameters(self) -> Dict[str, Tensor]:
        return {f"{self.prefix}.gamma": self.gamma, f"{self.prefix}.beta": self.beta}

    def __call__(self, x: Tensor) -> Tensor:
        return layernorm(x, self.gamma, self.beta)


def build_petl_block(cfg: EncoderConfig, rng: np.random.Generator) -> Optional[PetlBlock]:
    """Instancie le bloc PETL d'une sous-couche (None pour le linear probing)."""
    petl = cfg.petl
    if petl.kind is PetlKind.NONE:
        return None
    adapter_cfg = petl.adapter_config()
    if petl.kind is PetlKind.SINGLE:
        return BottleneckAdapter(cfg.d, adapter_cfg, rng)
    if petl.kind is PetlKind.DENSE_MOA:
        return DenseMoaLayer(cfg.d, cfg.experts_per_block, adapter_cfg, rng)
    return SoftMoaLayer(cfg.d, cfg.experts_per_block, petl.slots_per_expert, adapter_cfg, rng)


def apply_petl(block: PetlBlock, x: Tensor, trace: Optional[RoutingTrace] = None) -> Tensor:
    if isinstance(block, BottleneckAdapter):
        return block(x)
    return block(x, trace)


class EncoderLayer:
    """Couche pré-normalisée MHSA + FFN gelée, avec blocs PETL parallèles."""

    def __init__(self, cfg: EncoderConfig, index: int, rng: np.random.Generator, petl_rng: np.random.Generator) -> None:
        self.index = index
        self.prefix = f"layers.{index}"
        self.ln1 = LayerNorm(cfg.d, "ln1")
        self.attn = MultiHeadSelfAttention(cfg.d, cfg.n_heads, rng)
        self.ln2 = LayerNorm(cfg.d, "ln2")
        self.ffn = FeedForward(cfg.d, rng)
        self.petl: Dict[str, PetlBlock] = {}
        for site in cfg.petl_sites():
            self.petl[site] = build_petl_block(cfg, petl_rng)

    def backbone_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for module in (self.ln1, self.attn, self.ln2, self.ffn):
            params.update(module.parameters())
        return params

    def register(self, registry: ParamRegistry) -> None:
        for name, tensor in self.backbone_parameters().items():
            registry.register(f"{self.prefix}.{name}", tensor, trainable=False)
        for site, block in self.petl.items():
            block.register(registry, f"{self.prefix}.petl_{site}", trainable=True)

    def __call__(self, x: Tensor, trace: Optional[RoutingTrace] = None) -> Tensor:
        return layer_forward(self, x, trace)


def layer_forward(layer: EncoderLayer, x: Tensor, trace: Optional[RoutingTrace] = None) -> Tensor:
    """Une couche d'encodeur ; voir l'en-tête du module pour le placement des blocs PETL."""
    normed = layer.ln1(x)
    h = x + layer.attn(normed)
    if "attn" in layer.petl:
        h = h + apply_petl(layer.petl["attn"], normed, trace)
    normed_ffn = layer.ln2(h)
    out = h + layer.ffn(normed_ffn)
    if "ffn" in layer.petl:
        out = out + apply_petl(layer.petl["ffn"], normed_ffn, trace)
    return out


class ClassifierHead:
    """Application linéaire d → n_classes sur la moyenne des tokens ; toujours entraînable."""

    def __init__(self, d: int, n_classes: int, rng: np.random.Generator) -> None:
        self.w = _normal(rng, (d, n_classes))
        self.b = Tensor(np.zeros(n_classes))

    def parameters(self) -> Dict[str, Tensor]:
        return {"head.w": self.w, "head.b": self.b}

    def __call__(self, tokens: Tensor) -> Tensor:
        return tokens.mean(axis=-2) @ self.w + self.b


# ------------------------------------------------------------------
# Modèle complet
# ------------------------------------------------------------------
class SpectrogramEncoder:
    """Encodeur complet et son `ParamRegistry`.

    Le backbone, les blocs PETL et la tête tirent leurs poids de flux aléatoires
    distincts dérivés de `seed` : deux modèles de même graine partagent le
    même backbone quelle que soit la variante PETL.
    """

    def __init__(self, config: EncoderConfig, seed: int = 0) -> None:
        self.config = config
        self.seed = seed
        backbone_rng = np.random.default_rng([seed, 0])
        petl_rng = np.random.default_rng([seed, 1])
        head_rng = np.random.default_rng([seed, 2])

        self.embedding = PatchEmbedding(config, backbone_rng)
        self.layers = [EncoderLayer(config, i, backbone_rng, petl_rng) for i in range(config.n_layers)]
        self.head = ClassifierHead(config.d, config.n_classes, head_rng)

        self.registry = ParamRegistry()
        for name, tensor in self.embedding.parameters().items():
            self.registry.register(name, tensor, trainable=False)
        for layer in self.layers:
            layer.register(self.registry)
        for name, tensor in self.head.parameters().items():
            self.registry.register(name, tensor, trainable=True)
        logger.debug(
            "encoder_built",
            extra={
                "petl": config.petl.kind.value, "placement": config.placement.value,
                "trainable": self.registry.count(trainable=True), "frozen": self.registry.count(trainable=False),
            },
        )

    # --------------------------------------------------------------
    def petl_blocks(self) -> Dict[str, PetlBlock]:
        return {f"{layer.prefix}.petl_{site}": block for layer in self.layers for site, block in layer.petl.items()}

    def backbone_names(self) -> List[str]:
        return [n for n in self.registry if not (n.startswith("head.") or ".petl_" in n)]

    def freeze_backbone(self) -> None:
        for name in self.backbone_names():
            self.registry.set_trainable(name, False)

    def unfreeze_backbone(self) -> None:
        """Rend le backbone entraînable (pré-entraînement sur la tâche source)."""
        for name in self.backbone_names():
            self.registry.set_trainable(name, True)

    # --------------------------------------------------------------
    def forward(self, specs: np.ndarray, trace: Optional[RoutingTrace] = None) -> Tensor:
        return model_forward(self, specs, trace)

    def loss(self, specs: np.ndarray, labels: Sequence[int]) -> Tensor:
        return cross_entropy(self.forward(specs), labels)

    def predict(self, specs: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward(specs).data, axis=-1)


def model_forward(model: SpectrogramEncoder, specs: np.ndarray, trace: Optional[RoutingTrace] = None) -> Tensor:
    """patchify → couches → moyenne des tokens → tête ; retourne les logits `B×n_classes`."""
    x = patchify(specs, model.embedding)
    for layer in model.layers:
        x = layer_forward(layer, x, trace)
    return model.head(x)
