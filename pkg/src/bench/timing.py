# src/bench/timing.py
"""Mesure du temps d'un pas d'entraînement complet (avant + arrière + AdamW).

Chaque variante PETL est mesurée sur le même backbone et le même lot, après
`warmup` pas non mesurés. Le processus est épinglé sur un seul cœur (psutil)
pendant la mesure lorsque la plate-forme le permet.
"""

import logging
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterator, List, Optional

import numpy as np
import psutil

from src.error_management import ValidationError
from src.models.encoder import SpectrogramEncoder
from src.training.optimizer import AdamW

logger = logging.getLogger(__name__)

MIN_STEPS = 20
MIN_WARMUP = 5
BENCH_LR = 1e-3


@dataclass
class TimingReport:
    """Statistiques des durées (ms) des pas mesurés."""
    label: str
    samples_ms: List[float] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.samples_ms)

    @property
    def median_ms(self) -> float:
        return float(np.median(self.samples_ms))

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.samples_ms))

    @property
    def std_ms(self) -> float:
        return float(np.std(self.samples_ms))

    @property
    def iqr_ms(self) -> float:
        q1, q3 = np.percentile(self.samples_ms, [25, 75])
        return float(q3 - q1)

    def as_dict(self) -> dict:
        return {
            "variant": self.label, "steps": self.steps, "median_ms": self.median_ms,
            "mean_ms": self.mean_ms, "std_ms": self.std_ms, "iqr_ms": self.iqr_ms,
        }


def check_bench_args(steps: int, warmup: int) -> None:
    if steps < MIN_STEPS:
        raise ValidationError(f"steps={steps} < {MIN_STEPS}")
    if warmup < MIN_WARMUP:
        raise ValidationError(f"warmup={warmup} < {MIN_WARMUP}")


@contextmanager
def pinned_to_one_core() -> Iterator[Optional[int]]:
    """Restreint le processus au premier cœur autorisé, puis restaure l'affinité."""
    process = psutil.Process(os.getpid())
    try:
        previous = process.cpu_affinity()
    except (AttributeError, psutil.Error):
        logger.warning("cpu_affinity_unavailable")
        yield None
        return
    core = previous[0]
    process.cpu_affinity([core])
    try:
        yield core
    finally:
        process.cpu_affinity(previous)


def timer_resolution_ms() -> float:
    return time.get_clock_info("perf_counter").resolution * 1000.0


def time_train_steps(
        model: SpectrogramEncoder,
        specs: np.ndarray,
        labels: np.ndarray,
        steps: int,
        warmup: int,
        label: str = "",
) -> TimingReport:
    """Chronomètre `steps` pas complets après `warmup` pas de chauffe.

    Raises:
        ValidationError: Si steps < 20 ou warmup < 5.
    """
    check_bench_args(steps, warmup)
    optimizer = AdamW(model.registry)
    report = TimingReport(label=label or model.config.petl.kind.value)
    for i in range(warmup + steps):
        started = time.perf_counter()
        optimizer.zero_grad()
        loss = model.loss(specs, labels)
        loss.backward()
        optimizer.step(BENCH_LR)
        elapsed = (time.perf_counter() - started) * 1000.0
        if i >= warmup:
            report.samples_ms.append(elapsed)

    resolution = timer_resolution_ms()
    if resolution > min(1.0, 0.01 * report.median_ms):
        logger.warning(
            "timer_resolution_coarse",
            extra={"resolution_ms": resolution, "median_ms": report.median_ms, "variant": report.label},
        )
    logger.info("benchmark_variant", extra=report.as_dict())
    return report
