# src/bench/flops.py
"""Modèle analytique du coût du chemin adaptateur, par couche et par échantillon.

- expert : 2 projections de 2·d·r FLOPs par ligne traitée (L lignes par
  expert en Dense-MoA, p slots par expert en Soft-MoA) ;
- router : 2·L·d·N (Dense) ou 2·L·d·N·p (logits Soft) ;
- dispatch : (N·p)·L·d ; combine : L·(N·p)·d (Soft) ou N·L·d (gating Dense).

Les mêmes unités sont déclarées par les passes avant instrumentées
(`src.bench.counters`) : rapport et compteur coïncident exactement.
"""

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict

from src.bench.counters import FlopCounter
from src.error_management import ValidationError


class Variant(str, Enum):
    SINGLE = "single"
    DENSE = "dense"
    SOFT = "soft"


@dataclass(frozen=True)
class FlopReport:
    variant: Variant
    tokens: int
    d: int
    r: int
    n_experts: int
    slots_per_expert: int
    expert: int
    router: int
    dispatch: int
    combine: int
    expert_rows: int

    @property
    def total(self) -> int:
        return self.expert + self.router + self.dispatch + self.combine

    @property
    def soft_to_dense_expert_ratio(self) -> float:
        """Rapport p/L des coûts experts Soft/Dense à N égal (≥ 1 : les slots ne font rien gagner)."""
        return self.slots_per_expert / self.tokens

    def scaled(self, factor: int) -> "FlopReport":
        """Même rapport multiplié par `factor` (lots, couches, sites PETL)."""
        return FlopReport(
            self.variant, self.tokens, self.d, self.r, self.n_experts, self.slots_per_expert,
            self.expert * factor, self.router * factor, self.dispatch * factor, self.combine * factor,
            self.expert_rows * factor,
        )

    def matches(self, counter: FlopCounter) -> bool:
        return (
            (self.expert, self.router, self.dispatch, self.combine, self.expert_rows)
            == (counter.expert, counter.router, counter.dispatch, counter.combine, counter.expert_rows)
        )

    def as_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["variant"] = self.variant.value
        out["total"] = self.total
        out["soft_to_dense_expert_ratio"] = self.soft_to_dense_expert_ratio
        return out


def flop_model(tokens: int, d: int, r: int, n_experts: int = 1, slots_per_expert: int = 1, variant: Variant = Variant.SOFT) -> FlopReport:
    """Coût d'un bloc PETL sur une séquence de `tokens` tokens.

    Raises:
        ValidationError: Si une dimension n'est pas strictement positive.
    """
    if min(tokens, d, r, n_experts, slots_per_expert) < 1:
        raise ValidationError(f"dimensions non positives : L={tokens}, d={d}, r={r}, N={n_experts}, p={slots_per_expert}")
    variant = Variant(variant)
    per_row = 2 * 2 * d * r
    if variant is Variant.SINGLE:
        return FlopReport(variant, tokens, d, r, 1, 1, tokens * per_row, 0, 0, 0, tokens)
    if variant is Variant.DENSE:
        rows = n_experts * tokens
        return FlopReport(
            variant, tokens, d, r, n_experts, slots_per_expert,
            expert=rows * per_row,
            router=2 * tokens * d * n_experts,
            dispatch=0,
            combine=n_experts * tokens * d,
            expert_rows=rows,
        )
    slots = n_experts * slots_per_expert
    return FlopReport(
        variant, tokens, d, r, n_experts, slots_per_expert,
        expert=slots * per_row,
        router=2 * tokens * d * slots,
        dispatch=slots * tokens * d,
        combine=tokens * slots * d,
        expert_rows=slots,
    )
