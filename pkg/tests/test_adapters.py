# tests/test_adapters.py
"""Tests unitaires de l'adaptateur bottleneck (`src.models.adapters`)."""
import numpy as np
import pytest

from src.autograd import Tensor
from src.error_management import DimensionError, NumericError, ValidationError
from src.models.adapters import (
    Activation, AdapterConfig, BottleneckAdapter, InitScheme, adapter_forward, adapter_param_count,
)

pytestmark = pytest.mark.unit


def test_zero_up_init_outputs_zero(rng):
    """Teste qu'un adaptateur initialisé avec W_up = 0 et b_up = 0 renvoie zéro."""
    adapter = BottleneckAdapter(8, AdapterConfig(r=2), rng)
    y = adapter(Tensor(rng.normal(size=(5, 8))))
    assert np.array_equal(y.data, np.zeros((5, 8))), "La sortie initiale devrait être nulle."


def test_forward_matches_numpy_oracle(rng):
    """Teste la passe avant contre `relu(X·W_down + b_down)·W_up + b_up` en numpy."""
    w_down, b_down = rng.normal(size=(6, 3)), rng.normal(size=3)
    w_up, b_up = rng.normal(size=(3, 6)), rng.normal(size=6)
    adapter = BottleneckAdapter.from_weights(w_down, b_down, w_up, b_up, activation=Activation.RELU)
    x = rng.normal(size=(2, 4, 6))
    expected = np.maximum(x @ w_down + b_down, 0.0) @ w_up + b_up
    assert np.allclose(adapter_forward(adapter, Tensor(x)).data, expected), "Sortie différente de l'oracle."


def test_linear_activation_is_affine(rng):
    """Teste qu'avec l'activation linéaire l'adaptateur est une application affine."""
    w_down, w_up = rng.normal(size=(4, 2)), rng.normal(size=(2, 4))
    adapter = BottleneckAdapter.from_weights(w_down, np.zeros(2), w_up, np.zeros(4), activation=Activation.LINEAR)
    x = rng.normal(size=(3, 4))
    assert np.allclose(adapter(Tensor(x)).data, x @ w_down @ w_up), "L'adaptateur linéaire vaut X·W_down·W_up."


def test_param_count_formula():
    """Teste l'effectif d·r + r + r·d + d."""
    adapter = BottleneckAdapter(8, AdapterConfig(r=2, init=InitScheme.RANDOM))
    assert adapter.param_count == 42, "8·2 + 2 + 2·8 + 8 = 42 paramètres attendus."
    assert adapter_param_count(AdapterConfig(r=24), 768) == 37_656, "Effectif de l'adaptateur r=24, d=768 incorrect."


def test_random_init_is_seeded():
    """Teste que deux adaptateurs de même graine sont identiques."""
    a = BottleneckAdapter(8, AdapterConfig(r=2, init=InitScheme.RANDOM), np.random.default_rng(3))
    b = BottleneckAdapter(8, AdapterConfig(r=2, init=InitScheme.RANDOM), np.random.default_rng(3))
    assert all(np.array_equal(a.parameters()[k].data, b.parameters()[k].data) for k in a.parameters()), \
        "Même graine, mêmes poids."


def test_bottleneck_larger_than_width_rejected():
    """Teste qu'un goulot r > d lève `ValidationError`."""
    with pytest.raises(ValidationError):
        BottleneckAdapter(4, AdapterConfig(r=5))


def test_width_mismatch_rejected(rng):
    """Teste qu'une entrée de mauvaise largeur lève `DimensionError`."""
    adapter = BottleneckAdapter(8, AdapterConfig(r=2), rng)
    with pytest.raises(DimensionError):
        adapter(Tensor(np.zeros((3, 7))))


@pytest.mark.parametrize("documented", [AdapterConfig, NumericError])
def test_docstring_summary_is_clean(documented):
    """Teste que la première ligne de la docstring ne traîne pas de guillemet isolé."""
    summary = documented.__doc__.strip().splitlines()[0]
    assert not summary.endswith('"'), f"Résumé mal fermé : {summary!r}"
