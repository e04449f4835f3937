# src/autograd/gradcheck.py
"""Vérification des gradients par différences finies centrées.

Pour chaque paramètre entraînable, chaque scalaire est perturbé de ±h et la
dérivée numérique est comparée au gradient analytique. L'erreur relative d'un
tenseur est `max|a − n| / max(max|a|, max|n|, floor)` : la normalisation à
l'échelle du tenseur évite de diviser le bruit d'arrondi par des gradients
quasi nuls.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np
import pandas as pd

from src.autograd.registry import ParamRegistry
from src.autograd.tensor import Tensor
from src.error_management import NumericError

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4
ERROR_FLOOR = 1e-6


@dataclass
class GradcheckEntry:
    name: str
    n_elements: int
    max_abs_error: float
    max_rel_error: float
    passed: bool


@dataclass
class GradcheckReport:
    """Rapport par tenseur ; `passed` si toutes les erreurs relatives ≤ tolérance."""
    tolerance: float
    step: float
    entries: List[GradcheckEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def max_rel_error(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)

    def by_name(self) -> dict:
        return {e.name: e for e in self.entries}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [vars(e) for e in self.entries],
            columns=["name", "n_elements", "max_abs_error", "max_rel_error", "passed"],
        )


class SupportsLoss(Protocol):
    registry: ParamRegistry

    def loss(self, specs: np.ndarray, labels: Sequence[int]) -> Tensor: ...


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = ERROR_FLOOR) -> Tuple[float, float]:
    """Retourne (erreur absolue max, erreur relative normalisée par l'échelle du tenseur)."""
    abs_err = float(np.max(np.abs(analytic - numeric))) if analytic.size else 0.0
    scale = max(float(np.max(np.abs(analytic), initial=0.0)), float(np.max(np.abs(numeric), initial=0.0)), floor)
    return abs_err, abs_err / scale


def numeric_gradient(loss_fn: Callable[[], Tensor], tensor: Tensor, step: float = DEFAULT_STEP, name: str = "") -> np.ndarray:
    """Gradient numérique de `loss_fn` par rapport à `tensor` (différences centrées).

    Raises:
        NumericError: Si la perte perturbée n'est pas finie.
    """
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = loss_fn().item()
        flat[i] = original - step
        minus = loss_fn().item()
        flat[i] = original
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise NumericError("perte non finie pendant la vérification des gradients", parameter=name or tensor.name)
        out[i] = (plus - minus) / (2.0 * step)
    return grad


def check_gradients(
        loss_fn: Callable[[], Tensor],
        params: Iterable[Tuple[str, Tensor]],
        tolerance: float = DEFAULT_TOLERANCE,
        step: float = DEFAULT_STEP,
) -> GradcheckReport:
    """Compare gradients analytiques et numériques pour les tenseurs donnés.

    Args:
        loss_fn: Fonction sans argument qui reconstruit la perte scalaire.
        params: Couples (nom, tenseur) à vérifier ; les tenseurs sans gradient sont ignorés.
        tolerance: Erreur relative maximale admise.
        step: Pas h des différences centrées.

    Returns:
        Le rapport par tenseur.
    """
    params = [(n, t) for n, t in params if t.requires_grad]
    for _, tensor in params:
        tensor.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.item()):
        raise NumericError("perte non finie avant vérification", parameter=params[0][0] if params else None)
    loss.backward()

    report = GradcheckReport(tolerance=tolerance, step=step)
    for name, tensor in params:
        analytic = tensor.grad.copy()
        numeric = numeric_gradient(loss_fn, tensor, step=step, name=name)
        abs_err, rel_err = relative_error(analytic, numeric)
        entry = GradcheckEntry(name, tensor.size, abs_err, rel_err, rel_err <= tolerance)
        report.entries.append(entry)
        logger.debug("gradcheck_param", extra={"param": name, "max_rel_error": rel_err})
    return report


def gradcheck(
        model: SupportsLoss,
        batch: Tuple[np.ndarray, Sequence[int]],
        tolerance: float = DEFAULT_TOLERANCE,
        step: float = DEFAULT_STEP,
        names: Optional[Sequence[str]] = None,
) -> GradcheckReport:
    """Vérifie les gradients de tous les paramètres entraînables d'un modèle.

    Les paramètres gelés ne figurent pas dans le rapport.

    Args:
        model: Objet exposant `registry` et `loss(specs, labels)`.
        batch: Couple (spectrogrammes `B×F×T`, labels).
        tolerance: Erreur relative maximale admise.
        step: Pas h des différences centrées.
        names: Sous-ensemble optionnel de noms à vérifier.
    """
    specs, labels = batch
    selected: Mapping[str, Tensor] = dict(model.registry.trainable_items())
    if names is not None:
        selected = {n: selected[n] for n in names if n in selected}
    report = check_gradients(lambda: model.loss(specs, labels), selected.items(), tolerance=tolerance, step=step)
    logger.info(
        "gradcheck_done",
        extra={"n_params": len(report.entries), "max_rel_error": report.max_rel_error, "passed": report.passed},
    )
    return report
