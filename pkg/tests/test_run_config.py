# tests/test_run_config.py
"""Tests unitaires du chargement des configurations de run et des réglages globaux."""
import pytest

from src.config.settings import Settings, get_settings
from src.error_management import ConfigError
from src.experiments.run_config import RunConfig, load_run_config, parse_key_values, parse_layer_selector
from src.models.encoder import PetlKind
from tests.helpers import TINY_RUN

pytestmark = pytest.mark.unit


class TestKeyValueFormat:
    """Format texte `clé=valeur`."""

    def test_nested_keys_and_lists(self):
        """Teste la construction de l'arbre, les commentaires et les clés de liste."""
        tree = parse_key_values("# commentaire\nencoder.petl.r = 3  # fin\ntask.seeds = 1, 2,3\n\n")
        assert tree == {"encoder": {"petl": {"r": "3"}}, "task": {"seeds": ["1", "2", "3"]}}, "Arbre incorrect."

    def test_duplicate_key(self):
        """Teste qu'une clé dupliquée lève `ConfigError` en la nommant."""
        with pytest.raises(ConfigError) as excinfo:
            parse_key_values("seed = 1\nseed = 2\n")
        assert excinfo.value.key == "seed", "La clé fautive devrait être nommée."

    def test_line_without_equals(self):
        """Teste qu'une ligne sans `=` lève `ConfigError`."""
        with pytest.raises(ConfigError):
            parse_key_values("encoder.d 64\n")

    def test_leaf_and_section_conflict(self):
        """Teste qu'une clé ne peut être à la fois valeur et section."""
        with pytest.raises(ConfigError):
            parse_key_values("encoder = 3\nencoder.d = 8\n")


class TestLoadRunConfig:
    """Validation et hash des configurations."""

    def test_typed_values(self, write_config):
        """Teste la conversion des valeurs texte vers les types de la configuration."""
        config = load_run_config(write_config(TINY_RUN + "task.seeds = 4,5\nbench.variants = single,soft_moa\n"))
        assert config.encoder.d == 8 and config.encoder.petl.kind is PetlKind.SOFT_MOA, "Encodeur mal lu."
        assert config.task.seeds == [4, 5], "Liste de graines mal lue."
        assert config.bench.variants == [PetlKind.SINGLE, PetlKind.SOFT_MOA], "Variantes mal lues."

    def test_unknown_key_is_named(self, write_config):
        """Teste qu'une clé inconnue lève `ConfigError` avec la clé pointée."""
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(write_config("encoder.petl.nope = 1\n"))
        assert excinfo.value.key == "encoder.petl.nope", "La clé inconnue devrait être nommée."

    def test_invalid_value_is_named(self, write_config):
        """Teste qu'une valeur invalide lève `ConfigError` avec sa clé."""
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(write_config("train.epochs = zero\n"))
        assert excinfo.value.key == "train.epochs", "La clé fautive devrait être nommée."

    def test_inconsistent_encoder(self, write_config):
        """Teste qu'un encodeur incohérent (d non divisible par n_heads) est refusé."""
        with pytest.raises(ConfigError):
            load_run_config(write_config("encoder.d = 10\nencoder.n_heads = 4\n"))

    def test_missing_file(self, tmp_path):
        """Teste qu'un fichier absent lève `ConfigError`."""
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "absent.cfg")

    def test_hash_follows_file_bytes(self, write_config):
        """Teste que le hash dépend des octets du fichier."""
        a = load_run_config(write_config("seed = 1\n", "a.cfg"))
        b = load_run_config(write_config("seed = 1\n", "b.cfg"))
        c = load_run_config(write_config("seed  = 1\n", "c.cfg"))
        assert len(a.config_hash) == 16, "Hash tronqué à 16 caractères."
        assert a.config_hash == b.config_hash, "Mêmes octets, même hash."
        assert a.config_hash != c.config_hash, "Octets différents, hash différent."

    def test_yaml_equivalent(self, write_config):
        """Teste qu'un YAML décrit la même configuration que le format clé=valeur."""
        kv = load_run_config(write_config("encoder.d = 16\ntask.seeds = 1,2\n", "run.cfg"))
        yml = load_run_config(write_config("encoder:\n  d: 16\ntask:\n  seeds: [1, 2]\n", "run.yaml"))
        assert kv.model_dump() == yml.model_dump(), "Les deux formats devraient coïncider."

    def test_overrides_keep_hash(self, write_config, tmp_path):
        """Teste que les surcharges CLI gardent le hash et propagent la graine."""
        config = load_run_config(write_config("seed = 1\n"))
        overridden = config.with_overrides(seed=9, out=tmp_path / "x")
        assert overridden.seed == 9 and overridden.train.seed == 9, "La graine devrait être propagée."
        assert overridden.config_hash == config.config_hash, "Le hash identifie le fichier, pas les surcharges."

    def test_defaults(self):
        """Teste les valeurs par défaut de la configuration."""
        config = RunConfig()
        assert config.encoder.petl.kind is PetlKind.SOFT_MOA and config.encoder.petl.n_experts == 14, "Défauts PETL."


@pytest.mark.parametrize("selector,expected", [("all", [0, 1, 2, 3]), ("0,2", [0, 2]), ("1-3", [1, 2, 3]), ("3,0-1", [0, 1, 3])])
def test_layer_selector(selector, expected):
    """Teste les formes acceptées du sélecteur de couches."""
    assert parse_layer_selector(selector, 4) == expected, f"Sélecteur {selector!r} mal interprété."


@pytest.mark.parametrize("selector", ["4", "a", "-1", "2-x"])
def test_layer_selector_rejects(selector):
    """Teste qu'un sélecteur invalide ou hors limites lève `ConfigError`."""
    with pytest.raises(ConfigError):
        parse_layer_selector(selector, 4)


class TestSettings:
    """Réglages globaux (pydantic-settings)."""

    def test_yaml_defaults(self):
        """Teste la lecture de `configs/settings.yaml`."""
        settings = get_settings()
        assert settings.benchmark.steps >= 20 and settings.benchmark.warmup >= 5, "Bornes de benchmark non respectées."
        assert get_settings() is settings, "Le singleton devrait être réutilisé."

    def test_environment_variables(self, monkeypatch):
        """Teste les variables MOA_LAB_* (délimiteur `__` pour les sections)."""
        monkeypatch.setenv("MOA_LAB_LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("MOA_LAB_BENCHMARK__STEPS", "100")
        settings = Settings()
        assert settings.log_level == "DEBUG", "Variable de niveau ignorée."
        assert settings.benchmark.steps == 100, "Variable imbriquée ignorée."
