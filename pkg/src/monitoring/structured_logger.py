# src/monitoring/structured_logger.py
"""Journalisation structurée (JSON) pour le laboratoire MoA.

Tous les modules utilisent `logging.getLogger(__name__)` sous le logger racine
du projet ; ce module installe une seule fois le formateur JSON sur ce logger
racine. Les messages sont des identifiants courts (`train_step`,
`benchmark_variant`...) accompagnés de métadonnées dans `extra`.
"""

import logging
import sys
from typing import Optional, TextIO

from pythonjsonlogger import jsonlogger

ROOT_LOGGER_NAME = "src"

_handler: Optional[logging.StreamHandler] = None


def build_formatter() -> jsonlogger.JsonFormatter:
    """Construit le formateur JSON commun (champs renommés)."""
    return jsonlogger.JsonFormatter(
        "%(asctime)s %(name)s %(levelname)s %(message)s",
        rename_fields={
            "asctime": "timestamp",
            "levelname": "level",
            "name": "logger_name",
            "message": "msg",
        },
    )


def configure_logging(level: str = "INFO", stream: Optional[TextIO] = None) -> logging.Logger:
    """Installe le handler JSON sur le logger racine du projet.

    Les appels répétés réutilisent le même handler : ils ajustent le niveau et
    rebranchent le flux (le `sys.stderr` courant par défaut).

    Args:
        level: Niveau de log (`DEBUG`, `INFO`, `WARNING`...).
        stream: Flux de sortie (stderr par défaut, stdout reste réservé aux rapports CLI).

    Returns:
        Le logger racine du projet.
    """
    global _handler
    root = logging.getLogger(ROOT_LOGGER_NAME)
    root.setLevel(level.upper())
    if _handler is None:
        _handler = logging.StreamHandler(stream or sys.stderr)
        _handler.setFormatter(build_formatter())
        root.addHandler(_handler)
        root.propagate = False
    else:
        _handler.stream = stream or sys.stderr
    return root
