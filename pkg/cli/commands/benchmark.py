# cli/commands/benchmark.py
"""Commande `benchmark` : temps de pas d'entraînement par variante PETL.

Chaque variante de `bench.variants` est mesurée sur le même backbone et le
même lot ; le rapport donne médiane, moyenne et dispersion, ainsi que les
FLOPs instrumentés du chemin adaptateur.
"""

from pathlib import Path
from typing import Optional

import click

from cli.commands.common import config_option, handle_errors, load_config, out_option, seed_option
from src.config.settings import get_settings
from src.experiments.diagnostics import run_benchmark
from src.experiments.reporting import write_csv


@click.command()
@config_option
@out_option
@seed_option
@click.option("--steps", type=int, default=None, help="Pas mesurés (≥ 20).")
@click.option("--warmup", type=int, default=None, help="Pas de chauffe non mesurés (≥ 5).")
@handle_errors
def benchmark(config_path: Path, out_dir: Optional[Path], seed: Optional[int], steps: Optional[int], warmup: Optional[int]):
    """Mesure le temps médian d'un pas complet (avant, arrière, AdamW) pour chaque variante."""
    settings = get_settings().benchmark
    config = load_config(config_path, seed, out_dir)
    steps = settings.steps if steps is None else steps
    warmup = settings.warmup if warmup is None else warmup
    click.echo(f"📊 Benchmark : {steps} pas mesurés après {warmup} pas de chauffe")
    frame = run_benchmark(config, steps, warmup, pin=settings.pin_cpu)
    write_csv(frame, Path(config.out) / "benchmark.csv", config.config_hash)
    for row in frame.itertuples():
        click.echo(
            f"{row.variant:<10} médiane={row.median_ms:9.2f} ms  moyenne={row.mean_ms:9.2f} ms  "
            f"IQR={row.iqr_ms:7.2f} ms  ×single={row.ratio_to_single:.2f}"
        )
