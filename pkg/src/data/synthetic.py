# src/data/synthetic.py
"""Tâches synthétiques de classification de spectrogrammes.

Chaque classe possède un motif temps-fréquence fixe : une somme de blobs
gaussiens et un chirp linéaire. Un échantillon est ce motif plus un bruit
gaussien tiré d'un générateur dédié à (graine, variante, index) : la génération
est une fonction pure de la spécification.

Les variantes `source` et `target` tirent leurs descripteurs de flux aléatoires
disjoints ; la première sert au pré-entraînement du backbone, la seconde à
l'adaptation.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.error_management import ValidationError

logger = logging.getLogger(__name__)

BASELINE = -1.0


class TaskVariant(str, Enum):
    SOURCE = "source"
    TARGET = "target"


_VARIANT_STREAM = {TaskVariant.SOURCE: 0, TaskVariant.TARGET: 1}


class SyntheticTaskSpec(BaseModel):
    """Description complète d'une tâche synthétique.

    Attributes:
        n_classes: Nombre de classes.
        n_freq: F, nombre de bandes de fréquence.
        n_frames: T, nombre de trames.
        samples_per_class: Échantillons par classe (classes équilibrées).
        sigma: Écart-type du bruit additif.
        blobs_per_class: Blobs gaussiens par motif.
        seed: Graine de la tâche.
        variant: `target` (adaptation) ou `source` (pré-entraînement).
        test_fraction: Part stratifiée réservée au test.
    """
    model_config = ConfigDict(extra="forbid")

    n_classes: int = Field(default=10, ge=2)
    n_freq: int = Field(default=32, ge=4)
    n_frames: int = Field(default=128, ge=4)
    samples_per_class: int = Field(default=200, ge=1)
    sigma: float = Field(default=0.5, ge=0.0)
    blobs_per_class: int = Field(default=3, ge=1)
    seed: int = Field(default=0, ge=0)
    variant: TaskVariant = TaskVariant.TARGET
    test_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)


@dataclass(frozen=True)
class ClassPattern:
    """Descripteurs d'un motif : blobs (centre f, centre t, largeurs, amplitude) et chirp."""
    blobs: Tuple[Tuple[float, float, float, float, float], ...]
    chirp_start: float
    chirp_slope: float
    chirp_width: float
    chirp_amplitude: float


@dataclass
class SpectrogramDataset:
    """Spectrogrammes `n×F×T` (float64) et labels `n` (int64)."""
    specs: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self) -> None:
        self.specs = np.asarray(self.specs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.specs.ndim != 3 or len(self.specs) != len(self.labels):
            raise ValidationError(f"jeu de données incohérent : specs {self.specs.shape}, labels {self.labels.shape}")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValidationError(f"labels hors de [0, {self.n_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.specs.shape[1], self.specs.shape[2]

    def subset(self, indices: np.ndarray) -> "SpectrogramDataset":
        return SpectrogramDataset(self.specs[indices], self.labels[indices], self.n_classes)

    def batches(self, batch_size: int, order: np.ndarray = None) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        order = np.arange(len(self)) if order is None else order
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            yield self.specs[idx], self.labels[idx]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


# ------------------------------------------------------------------
# Motifs
# ------------------------------------------------------------------
def class_patterns(spec: SyntheticTaskSpec) -> List[ClassPattern]:
    """Tire les descripteurs des classes (flux propre à la variante)."""
    rng = np.random.default_rng([spec.seed, _VARIANT_STREAM[spec.variant], 0])
    f, t = spec.n_freq, spec.n_frames
    patterns = []
    for _ in range(spec.n_classes):
        blobs = tuple(
            (
                float(rng.uniform(0.1 * f, 0.9 * f)),
                float(rng.uniform(0.1 * t, 0.9 * t)),
                float(rng.uniform(0.04 * f, 0.12 * f)),
                float(rng.uniform(0.03 * t, 0.10 * t)),
                float(rng.uniform(1.5, 3.0)),
            )
            for _ in range(spec.blobs_per_class)
        )
        patterns.append(ClassPattern(
            blobs=blobs,
            chirp_start=float(rng.uniform(0.1 * f, 0.9 * f)),
            chirp_slope=float(rng.uniform(-0.8, 0.8) * f / t),
            chirp_width=float(rng.uniform(0.5, 2.0)),
            chirp_amplitude=float(rng.uniform(0.5, 1.5)),
        ))
    return patterns


def render_pattern(pattern: ClassPattern, n_freq: int, n_frames: int) -> np.ndarray:
    """Motif `F×T` sans bruit."""
    freqs = np.arange(n_freq, dtype=np.float64)[:, None]
    frames = np.arange(n_frames, dtype=np.float64)[None, :]
    out = np.full((n_freq, n_frames), BASELINE)
    for cf, ct, wf, wt, amp in pattern.blobs:
        out += amp * np.exp(-0.5 * (((freqs - cf) / wf) ** 2 + ((frames - ct) / wt) ** 2))
    track = pattern.chirp_start + pattern.chirp_slope * frames
    out += pattern.chirp_amplitude * np.exp(-0.5 * ((freqs - track) / pattern.chirp_width) ** 2)
    return out


def generate(spec: SyntheticTaskSpec) -> SpectrogramDataset:
    """Génère `n_classes × samples_per_class` échantillons, classe par classe.

    Raises:
        ValidationError: Si deux classes reçoivent des motifs identiques.
    """
    templates = np.stack([render_pattern(p, spec.n_freq, spec.n_frames) for p in class_patterns(spec)])
    for i in range(spec.n_classes):
        for j in range(i):
            if np.array_equal(templates[i], templates[j]):
                raise ValidationError(f"motifs identiques pour les classes {j} et {i}")

    n = spec.n_classes * spec.samples_per_class
    labels = np.repeat(np.arange(spec.n_classes), spec.samples_per_class)
    specs = np.empty((n, spec.n_freq, spec.n_frames))
    stream = _VARIANT_STREAM[spec.variant]
    for index, label in enumerate(labels):
        noise_rng = np.random.default_rng([spec.seed, stream, 1, index])
        specs[index] = templates[label] + spec.sigma * noise_rng.standard_normal((spec.n_freq, spec.n_frames))
    logger.info(
        "synthetic_task_generated",
        extra={"variant": spec.variant.value, "seed": spec.seed, "n_samples": n, "n_classes": spec.n_classes},
    )
    return SpectrogramDataset(specs, labels, spec.n_classes)


def stratified_split(dataset: SpectrogramDataset, test_fraction: float, seed: int = 0) -> Tuple[SpectrogramDataset, SpectrogramDataset]:
    """Sépare (train, test) en réservant `round(n_k·test_fraction)` échantillons de chaque classe."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValidationError(f"test_fraction={test_fraction} hors de [0, 1)")
    rng = np.random.default_rng([seed, 3])
    test_idx: List[int] = []
    for k in range(dataset.n_classes):
        members = np.flatnonzero(dataset.labels == k)
        n_test = int(round(len(members) * test_fraction))
        test_idx.extend(rng.permutation(members)[:n_test].tolist())
    test_mask = np.zeros(len(dataset), dtype=bool)
    test_mask[test_idx] = True
    return dataset.subset(np.flatnonzero(~test_mask)), dataset.subset(np.flatnonzero(test_mask))
