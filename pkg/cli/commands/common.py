# cli/commands/common.py
"""Options et gestion d'erreurs partagées par les commandes du laboratoire."""

import functools
import logging
from pathlib import Path
from typing import Any, Callable, Optional

import click

from src.error_management import EXIT_CONFIG_ERROR, MoaLabError, exit_code_for
from src.experiments.run_config import RunConfig, load_run_config

logger = logging.getLogger(__name__)

config_option = click.option(
    "--config", "config_path", required=True, type=click.Path(dir_okay=False, path_type=Path),
    help="Fichier RunConfig (clé=valeur ou YAML).",
)
out_option = click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
                          help="Répertoire de sortie (remplace `out` de la configuration).")
seed_option = click.option("--seed", type=click.IntRange(min=0), default=None, help="Graine (remplace `seed`).")


def load_config(config_path: Path, seed: Optional[int] = None, out_dir: Optional[Path] = None) -> RunConfig:
    return load_run_config(config_path).with_overrides(seed=seed, out=out_dir)


def handle_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """Traduit les erreurs du laboratoire en message ❌ et code de sortie (2 : configuration, 1 : numérique)."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except MoaLabError as exc:
            click.echo(f"❌ {exc}", err=True)
            logger.error("command_failed", extra={"command": func.__name__, "error_type": type(exc).__name__})
            raise SystemExit(exit_code_for(exc))
        except click.BadParameter as exc:
            click.echo(f"❌ {exc}", err=True)
            raise SystemExit(EXIT_CONFIG_ERROR)

    return wrapper
