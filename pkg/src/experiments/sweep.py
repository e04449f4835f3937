# src/experiments/sweep.py
"""Balayages d'ablation à budget de paramètres contrôlé.

- `budget`   : la grille donne r ; le nombre de paramètres croît avec r.
- `adapters` : la grille donne N ; r est résolu pour tenir le budget.
- `slots`    : la grille donne des couples N/p (Soft-MoA) ; r est résolu de même.

Le budget compte les paramètres PETL entraînables (tête exclue), toutes
couches confondues. Tous les points partagent graine et données.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError as PydanticValidationError

from src.error_management import ConfigError
from src.experiments.adaptation import run_task
from src.experiments.run_config import RunConfig, SweepMode
from src.models.encoder import EncoderConfig, PetlKind, param_counts

logger = logging.getLogger(__name__)

DEFAULT_GRIDS = {
    SweepMode.BUDGET: ["4", "8", "16", "24"],
    SweepMode.ADAPTERS: ["2", "4", "7", "14"],
    SweepMode.SLOTS: ["2/14", "4/6", "6/4", "8/3", "12/2", "24/1"],
}

SWEEP_COLUMNS = ["setting", "petl", "n_experts", "slots_per_expert", "r", "params", "feasible", "accuracy", "step_ms"]


@dataclass
class SweepPoint:
    setting: str
    encoder: Optional[EncoderConfig]
    n_experts: int
    slots_per_expert: int
    r: Optional[int]

    @property
    def feasible(self) -> bool:
        return self.encoder is not None


def petl_params(cfg: EncoderConfig) -> int:
    return param_counts(cfg)["petl"]


def _with_petl(base: EncoderConfig, **update) -> EncoderConfig:
    petl = base.petl.model_copy(update=update)
    try:
        return EncoderConfig.model_validate({**base.model_dump(), "petl": petl.model_dump()})
    except PydanticValidationError as exc:
        raise ConfigError(f"point de balayage invalide {update} : {exc.errors()[0]['msg']}", key="sweep.grid") from None


def solve_bottleneck(base: EncoderConfig, budget: int, n_experts: int, slots_per_expert: int) -> Optional[int]:
    """r entier le plus proche tel que les paramètres PETL égalent `budget` ; None si aucun r ∈ [1, d]."""
    c1 = petl_params(_with_petl(base, n_experts=n_experts, slots_per_expert=slots_per_expert, r=1))
    if base.d < 2:
        return 1 if c1 == budget else None
    c2 = petl_params(_with_petl(base, n_experts=n_experts, slots_per_expert=slots_per_expert, r=2))
    exact = 1 + (budget - c1) / (c2 - c1)
    r = int(math.floor(exact + 0.5))
    return r if 1 <= r <= base.d else None


def _parse_int(value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"valeur de grille invalide : {value!r}", key="sweep.grid") from None


def _parse_slots(value: str) -> Tuple[int, int]:
    parts = value.split("/")
    if len(parts) != 2:
        raise ConfigError(f"couple N/p attendu : {value!r}", key="sweep.grid")
    return _parse_int(parts[0]), _parse_int(parts[1])


def sweep_points(config: RunConfig) -> Tuple[List[SweepPoint], Optional[int]]:
    """Points de la grille et budget retenu (None en mode `budget`).

    Raises:
        ConfigError: Grille vide ou mal formée, variante PETL incompatible, point refusé par
            la validation de l'encodeur. Un N impair en Houlsby scindé est marqué infaisable.
    """
    mode = config.sweep.mode
    grid = config.sweep.grid or DEFAULT_GRIDS[mode]
    if not grid:
        raise ConfigError("grille de balayage vide", key="sweep.grid")
    base = config.encoder
    if base.petl.kind is PetlKind.NONE:
        raise ConfigError("le balayage exige une variante PETL", key="encoder.petl.kind")
    if mode is SweepMode.SLOTS:
        base = _with_petl(base, kind=PetlKind.SOFT_MOA)

    if mode is SweepMode.BUDGET:
        points = []
        for value in grid:
            r = _parse_int(value)
            enc = _with_petl(base, r=r) if 1 <= r <= base.d else None
            points.append(SweepPoint(f"r={r}", enc, base.petl.n_experts, base.petl.slots_per_expert, r))
        return points, None

    budget = config.sweep.budget or petl_params(base)
    points = []
    for value in grid:
        if mode is SweepMode.ADAPTERS:
            n, p = _parse_int(value), base.petl.slots_per_expert
            setting = f"N={n}"
        else:
            n, p = _parse_slots(value)
            setting = f"{n}/{p}"
        # houlsby_split répartit les experts en deux moitiés égales
        r = None if base.petl.houlsby_split and n % 2 else solve_bottleneck(base, budget, n, p)
        enc = _with_petl(base, n_experts=n, slots_per_expert=p, r=r) if r is not None else None
        if enc is None:
            logger.warning("sweep_point_infeasible", extra={"setting": setting, "budget": budget})
        points.append(SweepPoint(setting, enc, n, p, r))
    return points, budget


def run_sweep(config: RunConfig, dry_run: bool = False) -> pd.DataFrame:
    """Une ligne par point ; `dry_run` ne calcule que les effectifs de paramètres."""
    points, budget = sweep_points(config)
    seed = config.task.seeds[0]
    rows = []
    for point in points:
        row = {
            "setting": point.setting, "petl": config.encoder.petl.kind.value if point.encoder is None else point.encoder.petl.kind.value,
            "n_experts": point.n_experts, "slots_per_expert": point.slots_per_expert, "r": point.r,
            "params": np.nan, "feasible": point.feasible, "accuracy": np.nan, "step_ms": np.nan,
        }
        if point.feasible:
            row["params"] = petl_params(point.encoder)
            if not dry_run:
                run = run_task(config.model_copy(update={"encoder": point.encoder}), seed)
                row["accuracy"] = run.test_accuracy
                steps = run.result.log[run.result.log["kind"] == "train"]["step_ms"]
                row["step_ms"] = float(steps.median())
        logger.info("sweep_point", extra={k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()})
        rows.append(row)
    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    frame["budget"] = budget if budget is not None else np.nan
    return frame
