# src/config/settings.py
"""Réglages globaux : niveau de log et valeurs par défaut de `benchmark` et `gradcheck`.

Ordre de priorité : `configs/settings.yaml`, puis variables `MOA_LAB_*`, puis défauts.
"""
import logging
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).parent.parent.parent
DEFAULT_SETTINGS_PATH = PROJECT_ROOT / "configs" / "settings.yaml"


class BenchmarkSettings(BaseModel):
    """Valeurs par défaut de la commande `benchmark`"""
    steps: int = Field(default=50, ge=20)
    warmup: int = Field(default=5, ge=5)
    batch_size: int = Field(default=4, ge=1)
    pin_cpu: bool = True


class GradcheckSettings(BaseModel):
    """Bornes de la commande `gradcheck`"""
    tolerance: float = 1e-4
    step: float = 1e-5
    max_trainable: int = 10_000
    batch_size: int = 2


class Settings(BaseSettings):
    """Configuration globale du laboratoire"""
    model_config = SettingsConfigDict(env_prefix="MOA_LAB_", env_nested_delimiter="__", case_sensitive=False)

    log_level: str = "INFO"

    benchmark: BenchmarkSettings = Field(default_factory=BenchmarkSettings)
    gradcheck: GradcheckSettings = Field(default_factory=GradcheckSettings)

    @classmethod
    def from_yaml(cls, path: Path) -> "Settings":
        """Charger la configuration depuis un fichier YAML."""
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
            return cls(**data)
        except (IOError, OSError, yaml.YAMLError) as e:
            logger.error("settings_load_failed", extra={"path": str(path), "error": str(e)})
            raise


# Singleton pour les paramètres
_settings_instance: Optional[Settings] = None


def get_settings() -> Settings:
    global _settings_instance
    if _settings_instance is None:
        if DEFAULT_SETTINGS_PATH.exists():
            _settings_instance = Settings.from_yaml(DEFAULT_SETTINGS_PATH)
        else:
            _settings_instance = Settings()
    return _settings_instance


def reset_settings() -> None:
    """Oublie le singleton (tests)."""
    global _settings_instance
    _settings_instance = None
