# src/models/moa.py
"""Mélanges d'adaptateurs : Dense-MoA et Soft-MoA.

- Dense-MoA : un routeur `W` (d×N) produit des scores `G = softmax(XW)` par
  token ; la sortie est `Y[t] = Σᵢ G[t,i]·Eᵢ(X)[t]`. Chaque expert traite les
  L tokens.
- Soft-MoA : des paramètres de slots `Φ` (d×N·p) produisent les logits `XΦ`.
  Les poids de dispatch `D` (softmax sur les tokens, colonnes stochastiques)
  forment les slots `X̃ = DᵀX` ; le slot j est traité par l'expert ⌊j/p⌋ ;
  les poids de combinaison `C` (softmax sur les slots, lignes stochastiques)
  donnent `Y = C·Ỹ`. Les experts ne voient que N·p lignes, quel que soit L.

Les passes avant acceptent une dimension de lot en tête (`B×L×d`). Une
`RoutingTrace` optionnelle capture D, C (et G) par couche pour les analyses de
contribution des experts.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.autograd import ParamRegistry, Tensor, concat, softmax_axis, swap_last
from src.bench.counters import record
from src.error_management import ContractError, DimensionError, ValidationError
from src.models.adapters import AdapterConfig, BottleneckAdapter, adapter_param_count, INIT_STD


class MoaMode(str, Enum):
    DENSE = "dense"
    SOFT = "soft"


# ------------------------------------------------------------------
# Traces de routage
# ------------------------------------------------------------------
@dataclass
class LayerRouting:
    """Poids de routage capturés pour un bloc MoA (tableaux `[B×]L×…`)."""
    n_experts: int
    slots_per_expert: int
    dispatch: Optional[np.ndarray] = None
    combine: Optional[np.ndarray] = None
    gates: Optional[np.ndarray] = None


@dataclass
class RoutingTrace:
    """Traces par bloc, indexées par le nom du bloc (`layers.0.petl_attn`)."""
    layers: Dict[str, LayerRouting] = field(default_factory=dict)

    def record(self, name: str, routing: LayerRouting) -> None:
        self.layers[name] = routing

    def is_empty(self) -> bool:
        return not self.layers

    def layer_names(self) -> List[str]:
        return list(self.layers)

    def sample(self, index: int) -> "RoutingTrace":
        """Extrait la trace d'un échantillon d'un lot tracé."""
        out = RoutingTrace()
        for name, routing in self.layers.items():
            pick = (lambda a: None if a is None else (a[index] if a.ndim == 3 else a))
            out.record(name, LayerRouting(
                routing.n_experts, routing.slots_per_expert,
                pick(routing.dispatch), pick(routing.combine), pick(routing.gates),
            ))
        return out


# ------------------------------------------------------------------
# Couches
# ------------------------------------------------------------------
def _check_width(op: str, x: Tensor, w: Tensor) -> None:
    if x.ndim < 2 or w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise DimensionError(f"{op} : largeur d incompatible", x.shape, w.shape)


class DenseMoaLayer:
    """N adaptateurs experts partageant (d, r, activation) et un routeur W (d×N, sans biais)."""

    def __init__(self, d: int, n_experts: int, cfg: AdapterConfig, rng: Optional[np.random.Generator] = None) -> None:
        if n_experts < 1:
            raise ValidationError(f"Dense-MoA : N={n_experts} invalide (N ≥ 1)")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d = d
        self.n_experts = n_experts
        self.experts = [BottleneckAdapter(d, cfg, rng) for _ in range(n_experts)]
        self.router = Tensor(rng.normal(0.0, INIT_STD, size=(d, n_experts)))
        self.name = "dense_moa"

    def parameters(self) -> Dict[str, Tensor]:
        params = {"router": self.router}
        for i, expert in enumerate(self.experts):
            params.update({f"experts.{i}.{k}": t for k, t in expert.parameters().items()})
        return params

    def register(self, registry: ParamRegistry, prefix: str, trainable: bool = True) -> None:
        self.name = prefix
        for name, tensor in self.parameters().items():
            registry.register(f"{prefix}.{name}", tensor, trainable)

    def __call__(self, x: Tensor, trace: Optional[RoutingTrace] = None) -> Tensor:
        return dense_moa_forward(self, x, trace)


class SoftMoaLayer:
    """N adaptateurs experts et paramètres de slots Φ (d×N·p, sans biais) ; le slot j appartient à l'expert ⌊j/p⌋."""

    def __init__(
            self, d: int, n_experts: int, slots_per_expert: int, cfg: AdapterConfig,
            rng: Optional[np.random.Generator] = None,
    ) -> None:
        if n_experts < 1 or slots_per_expert < 1:
            raise ValidationError(f"Soft-MoA : N={n_experts}, p={slots_per_expert} invalides (N ≥ 1, p ≥ 1)")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d = d
        self.n_experts = n_experts
        self.slots_per_expert = slots_per_expert
        self.experts = [BottleneckAdapter(d, cfg, rng) for _ in range(n_experts)]
        self.phi = Tensor(rng.normal(0.0, INIT_STD, size=(d, n_experts * slots_per_expert)))
        self.name = "soft_moa"

    @property
    def n_slots(self) -> int:
        return self.n_experts * self.slots_per_expert

    def slot_owner(self, slot: int) -> int:
        return slot // self.slots_per_expert

    def parameters(self) -> Dict[str, Tensor]:
        params = {"phi": self.phi}
        for i, expert in enumerate(self.experts):
            params.update({f"experts.{i}.{k}": t for k, t in expert.parameters().items()})
        return params

    def register(self, registry: ParamRegistry, prefix: str, trainable: bool = True) -> None:
        self.name = prefix
        for name, tensor in self.parameters().items():
            registry.register(f"{prefix}.{name}", tensor, trainable)

    def __call__(self, x: Tensor, trace: Optional[RoutingTrace] = None) -> Tensor:
        return soft_moa_forward(self, x, trace)


# ------------------------------------------------------------------
# Routage
# ------------------------------------------------------------------
def router_gates(x: Tensor, w: Tensor) -> Tensor:
    """G = softmax(XW) sur l'axe des experts ; chaque ligne somme à 1."""
    _check_width("router_gates", x, w)
    return softmax_axis(x @ w, axis=-1)


def dispatch_weights(x: Tensor, phi: Tensor) -> Tensor:
    """D = softmax de XΦ sur l'axe des tokens ; chaque colonne somme à 1."""
    _check_width("dispatch_weights", x, phi)
    return softmax_axis(x @ phi, axis=-2)


def combine_weights(x: Tensor, phi: Tensor) -> Tensor:
    """C = softmax de XΦ sur l'axe des slots ; chaque ligne somme à 1."""
    _check_width("combine_weights", x, phi)
    return softmax_axis(x @ phi, axis=-1)


def dense_moa_forward(layer: DenseMoaLayer, x: Tensor, trace: Optional[RoutingTrace] = None) -> Tensor:
    """Somme pondérée par token des N experts, tous évalués sur tous les tokens."""
    gates = router_gates(x, layer.router)
    rows = int(np.prod(x.shape[:-1]))
    n = layer.n_experts
    record("router", 2 * rows * layer.d * n)
    y = None
    for i, expert in enumerate(layer.experts):
        term = gates[..., i:i + 1] * expert(x)
        y = term if y is None else y + term
    record("combine", n * rows * layer.d)
    if trace is not None:
        trace.record(layer.name, LayerRouting(n, 1, gates=gates.data.copy()))
    return y


def soft_moa_forward(layer: SoftMoaLayer, x: Tensor, trace: Optional[RoutingTrace] = None) -> Tensor:
    """X̃ = DᵀX ; Ỹ_j = E_⌊j/p⌋(X̃_j) ; Y = C·Ỹ."""
    _check_width("soft_moa_forward", x, layer.phi)
    tokens = x.shape[-2]
    lead = int(np.prod(x.shape[:-2]))
    n_slots, d, p = layer.n_slots, layer.d, layer.slots_per_expert

    logits = x @ layer.phi
    record("router", 2 * lead * tokens * d * n_slots)
    dispatch = softmax_axis(logits, axis=-2)
    combine = softmax_axis(logits, axis=-1)

    slots_in = swap_last(dispatch) @ x
    record("dispatch", lead * n_slots * tokens * d)
    slots_out = concat(
        [expert(slots_in[..., i * p:(i + 1) * p, :]) for i, expert in enumerate(layer.experts)],
        axis=-2,
    )
    y = combine @ slots_out
    record("combine", lead * tokens * n_slots * d)
    if trace is not None:
        trace.record(layer.name, LayerRouting(
            layer.n_experts, p, dispatch=dispatch.data.copy(), combine=combine.data.copy(),
        ))
    return y


# ------------------------------------------------------------------
# Analyses de contribution
# ------------------------------------------------------------------
def _select_layer(trace: RoutingTrace, layer: Optional[str]) -> LayerRouting:
    if trace is None or trace.is_empty():
        raise ContractError("trace de routage vide")
    if layer is None:
        layer = trace.layer_names()[0]
    if layer not in trace.layers:
        raise ContractError(f"couche absente de la trace : {layer}")
    routing = trace.layers[layer]
    if routing.combine is None:
        raise ContractError(f"la couche {layer} n'a pas de poids de combinaison (Soft-MoA requis)")
    return routing


def expert_contribution(trace: RoutingTrace, p: int, layer: Optional[str] = None) -> np.ndarray:
    """Contribution moyenne de chaque expert aux tokens de sortie.

    contribution[i] = moyenne sur les tokens t de Σ_{j: ⌊j/p⌋=i} C[t,j] ; si la
    trace porte un lot, la moyenne couvre aussi les échantillons.

    Raises:
        ContractError: Si la trace est vide ou sans C.
    """
    routing = _select_layer(trace, layer)
    c = routing.combine
    n_slots = c.shape[-1]
    if n_slots % p:
        raise ContractError(f"{n_slots} slots non divisibles par p={p}")
    per_expert = c.reshape(c.shape[:-1] + (n_slots // p, p)).sum(axis=-1)
    return per_expert.reshape(-1, n_slots // p).mean(axis=0)


@dataclass
class ClassContribution:
    """Matrice N×K ; les colonnes sans échantillon valent NaN et sont marquées absentes."""
    matrix: np.ndarray
    present: np.ndarray


def per_class_contribution(
        traces: Sequence[RoutingTrace],
        labels: Sequence[int],
        p: int,
        n_classes: Optional[int] = None,
        layer: Optional[str] = None,
) -> ClassContribution:
    """Entrée (i,k) = moyenne sur les échantillons de classe k de leur contribution[i]."""
    if len(traces) != len(labels):
        raise ContractError(f"{len(traces)} traces pour {len(labels)} labels")
    if not traces:
        raise ContractError("aucune trace fournie")
    contributions = np.stack([expert_contribution(t, p, layer) for t in traces])
    labels_arr = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels_arr.max()) + 1 if n_classes is None else n_classes
    matrix = np.full((contributions.shape[1], n_classes), np.nan)
    present = np.zeros(n_classes, dtype=bool)
    for k in range(n_classes):
        mask = labels_arr == k
        if mask.any():
            matrix[:, k] = contributions[mask].mean(axis=0)
            present[k] = True
    return ClassContribution(matrix=matrix, present=present)


# ------------------------------------------------------------------
# Comptage de paramètres
# ------------------------------------------------------------------
def moa_param_count(n_experts: int, slots_per_expert: int, r: int, d: int, layers: int, mode: MoaMode) -> int:
    """dense : layers·(N·(2dr + r + d) + d·N) ; soft : layers·(N·(2dr + r + d) + d·N·p)."""
    mode = MoaMode(mode)
    experts = n_experts * adapter_param_count(AdapterConfig(r=r), d)
    routing = d * n_experts if mode is MoaMode.DENSE else d * n_experts * slots_per_expert
    return layers * (experts + routing)
