# tests/conftest.py
"""Fixtures partagées par les tests du laboratoire MoA.

Les modèles de test sont volontairement minuscules (d=8, quelques tokens) :
la différentiation automatique numpy reste rapide et les oracles peuvent être
écrits en numpy pur.
"""
import numpy as np
import pytest

from src.config.settings import reset_settings
from src.data.synthetic import SyntheticTaskSpec, generate
from tests.helpers import tiny_encoder


@pytest.fixture(autouse=True)
def fresh_settings():
    """Réinitialise le singleton de réglages entre deux tests."""
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def rng():
    """Générateur numpy déterministe."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    """Configuration Soft-MoA minuscule (N=2, p=1, r=2)."""
    return tiny_encoder()


@pytest.fixture
def tiny_dataset():
    """Tâche synthétique 3 classes × 4 échantillons sur des spectrogrammes 8×8."""
    spec = SyntheticTaskSpec(n_classes=3, n_freq=8, n_frames=8, samples_per_class=4, sigma=0.1, seed=5)
    return generate(spec)


@pytest.fixture
def write_config(tmp_path):
    """Écrit un fichier RunConfig `clé=valeur` et retourne son chemin."""

    def _write(text: str, name: str = "run.cfg"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


