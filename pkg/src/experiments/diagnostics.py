# src/experiments/diagnostics.py
"""Vérification des gradients et mesure du temps de pas, pilotées par une RunConfig."""

import logging
from contextlib import nullcontext
from typing import List

import numpy as np
import pandas as pd

from src.autograd import GradcheckReport, gradcheck
from src.bench.counters import count_flops
from src.bench.flops import Variant, flop_model
from src.bench.timing import TimingReport, check_bench_args, pinned_to_one_core, time_train_steps
from src.config.settings import get_settings
from src.data.synthetic import generate
from src.error_management import ConfigError
from src.experiments.run_config import RunConfig
from src.models.adapters import InitScheme
from src.models.encoder import EncoderConfig, PetlKind, SpectrogramEncoder, param_counts

logger = logging.getLogger(__name__)

_FLOP_VARIANT = {PetlKind.SINGLE: Variant.SINGLE, PetlKind.DENSE_MOA: Variant.DENSE, PetlKind.SOFT_MOA: Variant.SOFT}


def _first_batch(config: RunConfig, batch_size: int):
    per_class = -(-batch_size // config.encoder.n_classes)
    dataset = generate(config.task_spec(config.task.seeds[0]).model_copy(update={"samples_per_class": per_class}))
    specs, labels = next(dataset.batches(batch_size))
    return specs, labels


def run_gradcheck(config: RunConfig) -> GradcheckReport:
    """Gradcheck de tous les paramètres entraînables, initialisés aléatoirement.

    Raises:
        ConfigError: Si le modèle dépasse le plafond de scalaires entraînables.
    """
    settings = get_settings().gradcheck
    petl = config.encoder.petl.model_copy(update={"init": InitScheme.RANDOM})
    encoder = EncoderConfig.model_validate({**config.encoder.model_dump(), "petl": petl.model_dump()})
    trainable = param_counts(encoder)["trainable"]
    if trainable > settings.max_trainable:
        raise ConfigError(
            f"gradcheck limité à {settings.max_trainable} scalaires entraînables (reçu {trainable})",
            key="encoder",
        )
    model = SpectrogramEncoder(encoder, seed=config.seed)
    batch = _first_batch(config, settings.batch_size)
    report = gradcheck(model, batch, tolerance=settings.tolerance, step=settings.step)
    logger.info(
        "gradcheck_finished",
        extra={"passed": report.passed, "max_rel_error": report.max_rel_error, "trainable": trainable},
    )
    return report


def run_benchmark(config: RunConfig, steps: int, warmup: int, pin: bool = True) -> pd.DataFrame:
    """Temps de pas médian/moyen de chaque variante de `bench.variants`.

    Les variantes partagent backbone, graine et lot. Les colonnes `*_flops`
    proviennent du compteur instrumenté d'une passe avant, par échantillon.
    """
    check_bench_args(steps, warmup)
    batch_size = config.bench.batch_size or get_settings().benchmark.batch_size
    specs, labels = _first_batch(config, batch_size)

    rows: List[dict] = []
    with pinned_to_one_core() if pin else nullcontext():
        for kind in config.bench.variants:
            petl = config.encoder.petl.model_copy(update={"kind": kind})
            encoder = EncoderConfig.model_validate({**config.encoder.model_dump(), "petl": petl.model_dump()})
            model = SpectrogramEncoder(encoder, seed=config.seed)
            with count_flops() as counter:
                model.forward(specs[:1])
            report: TimingReport = time_train_steps(model, specs, labels, steps, warmup, label=kind.value)
            row = report.as_dict()
            row.update({
                "n_experts": petl.n_experts, "slots_per_expert": petl.slots_per_expert, "r": petl.r,
                "tokens": encoder.n_tokens, "d": encoder.d, "layers": encoder.n_layers,
                "petl_params": param_counts(encoder)["petl"],
                "expert_flops": counter.expert, "router_flops": counter.router,
                "dispatch_flops": counter.dispatch, "combine_flops": counter.combine, "total_flops": counter.total,
            })
            if kind in _FLOP_VARIANT:
                sites = len(encoder.petl_sites()) * encoder.n_layers
                model_flops = flop_model(
                    encoder.n_tokens, encoder.d, petl.r, encoder.experts_per_block, petl.slots_per_expert, _FLOP_VARIANT[kind],
                ).scaled(sites)
                row["flop_model_matches"] = model_flops.matches(counter)
            rows.append(row)
    frame = pd.DataFrame(rows)
    logger.info("benchmark_finished", extra={"variants": len(rows), "steps": steps, "warmup": warmup})
    single = frame.loc[frame["variant"] == PetlKind.SINGLE.value, "median_ms"]
    frame["ratio_to_single"] = frame["median_ms"] / float(single.iloc[0]) if len(single) else np.nan
    return frame
