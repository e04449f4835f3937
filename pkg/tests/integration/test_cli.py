# tests/integration/test_cli.py
"""Tests d'intégration de la CLI (`cli.main`) avec le `CliRunner` de click."""
import pandas as pd
import pytest
from click.testing import CliRunner

from cli.main import cli
from src.data.dataset_io import load_dataset
from tests.helpers import TINY_RUN

pytestmark = pytest.mark.integration


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def tiny_run(write_config, tmp_path):
    """Configuration minuscule écrivant dans `tmp_path/out`."""
    return write_config(TINY_RUN + f"out = {tmp_path / 'out'}\n")


def test_group_lists_commands(runner):
    """Teste que le groupe affiche l'aide et toutes les commandes."""
    result = runner.invoke(cli, [])
    assert result.exit_code == 0, result.output
    for command in ("train", "benchmark", "gradcheck", "sweep", "analyze", "paramcount", "gen-data"):
        assert command in result.output, f"La commande {command} devrait être listée."


def test_paramcount_reference_shape(runner):
    """Teste les effectifs de référence affichés par `paramcount --reference-shape`."""
    result = runner.invoke(cli, ["paramcount", "--reference-shape"])
    assert result.exit_code == 0, result.output
    for value in ("451872", "516264", "23839"):
        assert value in result.output, f"{value} devrait figurer dans la sortie."


def test_paramcount_requires_an_input(runner):
    """Teste que `paramcount` sans argument sort avec le code 2."""
    assert runner.invoke(cli, ["paramcount"]).exit_code == 2, "Code 2 attendu sans --config ni --reference-shape."


def test_unknown_key_exits_with_config_code(runner, write_config):
    """Teste qu'une clé inconnue donne le code 2 et nomme la clé."""
    path = write_config("encoder.petl.nope = 3\n")
    result = runner.invoke(cli, ["train", "--config", str(path)])
    assert result.exit_code == 2, result.output
    assert "encoder.petl.nope" in result.output, "La clé fautive devrait être affichée."


def test_gradcheck_command(runner, tiny_run, tmp_path):
    """Teste que `gradcheck` réussit sur le modèle minuscule et écrit son CSV."""
    result = runner.invoke(cli, ["gradcheck", "--config", str(tiny_run)])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "out" / "gradcheck.csv")
    assert frame["passed"].all(), "Chaque tenseur devrait passer."
    assert frame["config_hash"].nunique() == 1, "Chaque ligne porte le hash de la configuration."


def test_train_then_analyze(runner, tiny_run, tmp_path):
    """Teste l'enchaînement `train` puis `analyze` sur le checkpoint produit."""
    result = runner.invoke(cli, ["train", "--config", str(tiny_run), "--seed", "3"])
    assert result.exit_code == 0, result.output
    out = tmp_path / "out"
    for name in ("train_log.csv", "summary.csv", "model.smoa"):
        assert (out / name).exists(), f"{name} devrait être écrit."
    summary = pd.read_csv(out / "summary.csv")
    assert summary.loc[0, "petl"] == "soft_moa", "Le résumé devrait nommer la variante."

    result = runner.invoke(cli, ["analyze", "--config", str(tiny_run), "--layers", "0"])
    assert result.exit_code == 0, result.output
    layers = pd.read_csv(out / "contributions_layers.csv")
    assert len(layers) == 2, "Deux experts sur une couche."
    assert (out / "contributions_classes.csv").exists(), "La table par classe devrait être écrite."


def test_analyze_missing_checkpoint(runner, tiny_run, tmp_path):
    """Teste qu'un checkpoint absent fait échouer `analyze` proprement."""
    result = runner.invoke(cli, ["analyze", "--config", str(tiny_run), "--checkpoint", str(tmp_path / "none.smoa")])
    assert result.exit_code == 2, result.output


def test_gen_data(runner, tiny_run, tmp_path):
    """Teste que `gen-data` écrit un fichier SMDS1 relisible."""
    target = tmp_path / "task.smds"
    result = runner.invoke(cli, ["gen-data", "--config", str(tiny_run), "--out", str(target)])
    assert result.exit_code == 0, result.output
    dataset = load_dataset(target)
    assert len(dataset) == 15 and dataset.shape == (8, 8), "3 classes × 5 échantillons de 8×8 attendus."


def test_sweep_dry_run(runner, tiny_run, tmp_path):
    """Teste un balayage à blanc en mode budget."""
    result = runner.invoke(cli, ["sweep", "--config", str(tiny_run), "--mode", "budget", "--dry-run"])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "out" / "sweep.csv")
    assert list(frame["setting"]) == ["r=4", "r=8", "r=16", "r=24"], "Grille par défaut du mode budget."
    assert list(frame["feasible"]) == [True, True, False, False], "r > d est infaisable."


def test_benchmark_rejects_short_runs(runner, tiny_run):
    """Teste que `benchmark --steps 5` sort avec le code 2."""
    result = runner.invoke(cli, ["benchmark", "--config", str(tiny_run), "--steps", "5"])
    assert result.exit_code == 2, result.output
