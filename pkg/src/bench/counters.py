# src/bench/counters.py
"""Compteurs d'instrumentation du chemin adaptateur.

Les passes avant des adaptateurs et des blocs MoA déclarent leur coût ici
lorsqu'un compteur est actif (`with count_flops() as c:`). Les unités suivent
`src.bench.flops` : les projections et les logits comptent 2 FLOPs par
multiplication-addition, les mélanges (gating, dispatch, combine) une unité
par multiplication-addition.
"""

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, fields
from typing import Dict, Iterator, Optional

COMPONENTS = ("expert", "router", "dispatch", "combine")


@dataclass
class FlopCounter:
    """Accumulateur par composant, plus le nombre de lignes évaluées par les experts."""
    expert: int = 0
    router: int = 0
    dispatch: int = 0
    combine: int = 0
    expert_rows: int = 0
    expert_calls: int = 0

    @property
    def total(self) -> int:
        return self.expert + self.router + self.dispatch + self.combine

    def as_dict(self) -> Dict[str, int]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["total"] = self.total
        return out


_active: ContextVar[Optional[FlopCounter]] = ContextVar("moa_flop_counter", default=None)


@contextmanager
def count_flops() -> Iterator[FlopCounter]:
    """Active un compteur pour la durée du bloc."""
    counter = FlopCounter()
    token = _active.set(counter)
    try:
        yield counter
    finally:
        _active.reset(token)


def record(component: str, amount: int) -> None:
    counter = _active.get()
    if counter is not None:
        setattr(counter, component, getattr(counter, component) + int(amount))


def record_expert(rows: int, d: int, r: int) -> None:
    """Une évaluation d'expert sur `rows` lignes : deux projections de 2·d·r FLOPs par ligne."""
    counter = _active.get()
    if counter is not None:
        counter.expert += rows * 2 * d * r * 2
        counter.expert_rows += rows
        counter.expert_calls += 1
