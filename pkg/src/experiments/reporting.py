# src/experiments/reporting.py
"""Écriture des CSV produits par les commandes (UTF-8, virgule, en-tête, point décimal)."""

import logging
from pathlib import Path
from typing import Union

import pandas as pd

logger = logging.getLogger(__name__)


def write_csv(frame: pd.DataFrame, path: Union[str, Path], config_hash: str) -> Path:
    """Écrit `frame` avec une colonne `config_hash` finale."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = frame.copy()
    out["config_hash"] = config_hash
    out.to_csv(path, index=False, encoding="utf-8", float_format="%.10g")
    logger.info("csv_written", extra={"path": str(path), "rows": len(out)})
    return path
