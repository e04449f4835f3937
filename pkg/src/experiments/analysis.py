# src/experiments/analysis.py
"""Contributions des experts Soft-MoA sur un jeu d'évaluation.

Produit deux tables :
- par couche : contribution moyenne de chaque expert aux tokens de sortie,
  moyennée sur tous les lots ;
- par classe : matrice N×K pour chaque couche retenue, plus la moyenne
  inter-couches (`scope=mean`).
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from src.data.synthetic import SpectrogramDataset
from src.error_management import ValidationError
from src.models.encoder import PetlKind, SpectrogramEncoder
from src.models.moa import ClassContribution, RoutingTrace, expert_contribution, per_class_contribution

logger = logging.getLogger(__name__)

LAYER_COLUMNS = ["layer", "block", "expert", "contribution"]
CLASS_COLUMNS = ["scope", "expert", "class", "contribution", "present"]


@dataclass
class ContributionReport:
    layers: pd.DataFrame
    classes: pd.DataFrame


def collect_traces(model: SpectrogramEncoder, dataset: SpectrogramDataset, batch_size: int = 32) -> List[RoutingTrace]:
    """Une trace par échantillon, dans l'ordre du jeu de données."""
    traces: List[RoutingTrace] = []
    for specs, _ in dataset.batches(batch_size):
        trace = RoutingTrace()
        model.forward(specs, trace=trace)
        traces.extend(trace.sample(i) for i in range(len(specs)))
    return traces


def block_names(model: SpectrogramEncoder, layers: Sequence[int]) -> List[str]:
    return [name for name in model.petl_blocks() if int(name.split(".")[1]) in set(layers)]


def analyze_contributions(
        model: SpectrogramEncoder,
        dataset: SpectrogramDataset,
        layers: Sequence[int],
        batch_size: int = 32,
) -> ContributionReport:
    """Contributions par couche et par classe pour les couches `layers`.

    Raises:
        ValidationError: Si le modèle n'est pas un Soft-MoA ou si le jeu est vide.
    """
    if model.config.petl.kind is not PetlKind.SOFT_MOA:
        raise ValidationError(f"analyse réservée aux modèles soft_moa (reçu {model.config.petl.kind.value})")
    if len(dataset) == 0:
        raise ValidationError("jeu d'analyse vide")
    p = model.config.petl.slots_per_expert
    traces = collect_traces(model, dataset, batch_size)
    names = block_names(model, layers)

    layer_rows = []
    class_rows = []
    matrices: List[ClassContribution] = []
    for name in names:
        per_sample = np.stack([expert_contribution(t, p, layer=name) for t in traces])
        for expert, value in enumerate(per_sample.mean(axis=0)):
            layer_rows.append({"layer": int(name.split(".")[1]), "block": name, "expert": expert, "contribution": float(value)})
        matrix = per_class_contribution(traces, dataset.labels, p, n_classes=dataset.n_classes, layer=name)
        matrices.append(matrix)
        class_rows.extend(_matrix_rows(name, matrix))

    if matrices:
        stacked = np.stack([m.matrix for m in matrices])
        mean = ClassContribution(matrix=stacked.mean(axis=0), present=matrices[0].present)
        class_rows.extend(_matrix_rows("mean", mean))
    logger.info("contributions_analyzed", extra={"n_samples": len(dataset), "blocks": len(names)})
    return ContributionReport(
        layers=pd.DataFrame(layer_rows, columns=LAYER_COLUMNS),
        classes=pd.DataFrame(class_rows, columns=CLASS_COLUMNS),
    )


def _matrix_rows(scope: str, contribution: ClassContribution) -> List[Dict[str, object]]:
    n_experts, n_classes = contribution.matrix.shape
    return [
        {
            "scope": scope, "expert": i, "class": k,
            "contribution": float(contribution.matrix[i, k]), "present": bool(contribution.present[k]),
        }
        for i in range(n_experts) for k in range(n_classes)
    ]
