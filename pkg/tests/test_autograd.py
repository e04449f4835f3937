# tests/test_autograd.py
"""Tests unitaires de la différentiation automatique (`src.autograd`).

Les gradients des primitives sont comparés à des formules fermées ou aux
différences finies centrées.
"""
import math

import numpy as np
import pytest

from src.autograd import (
    ParamRegistry, Tensor, check_gradients, concat, cross_entropy, feed_forward, gelu, layernorm, matmul,
    self_attention, softmax_axis, stack,
)
from src.error_management import ContractError, DimensionError, ValidationError

pytestmark = pytest.mark.unit


def test_add_broadcast_reduces_gradient(rng):
    """Teste que le gradient d'un opérande diffusé est sommé sur les axes diffusés."""
    a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(3,)), requires_grad=True)
    (a + b).sum().backward()
    assert np.allclose(a.grad, np.ones((2, 3))), "Le gradient de `a` devrait valoir 1 partout."
    assert np.allclose(b.grad, np.full(3, 2.0)), "Le gradient de `b` devrait être sommé sur les 2 lignes."


def test_batched_matmul_gradients(rng):
    """Teste les gradients d'un produit matriciel par lots contre un oracle numpy."""
    a_np, b_np = rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 5))
    a = Tensor(a_np, requires_grad=True)
    b = Tensor(b_np, requires_grad=True)
    matmul(a, b).sum().backward()
    assert np.allclose(a.grad, np.broadcast_to(b_np.sum(axis=1), (2, 3, 4))), "Gradient de A incorrect."
    assert np.allclose(b.grad, np.repeat(a_np.reshape(-1, 4).sum(axis=0)[:, None], 5, axis=1)), "Gradient de B incorrect."


def test_matmul_rejects_inner_mismatch():
    """Teste qu'un produit à dimensions internes incompatibles lève `DimensionError`."""
    with pytest.raises(DimensionError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_reused_node_accumulates(rng):
    """Teste qu'un tenseur utilisé deux fois reçoit la somme des contributions."""
    x = Tensor(rng.normal(size=(3,)), requires_grad=True)
    (x * x).sum().backward()
    assert np.allclose(x.grad, 2 * x.data), "d(x²)/dx devrait valoir 2x."


def test_backward_accumulates_until_zero_grad(rng):
    """Teste que deux rétropropagations successives accumulent les gradients."""
    x = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    x.sum().backward()
    x.sum().backward()
    assert np.allclose(x.grad, 2.0), "Les gradients devraient s'accumuler."
    x.zero_grad()
    assert x.grad is None or np.allclose(x.grad, 0.0), "zero_grad devrait vider le tampon."


def test_backward_requires_scalar():
    """Teste que `backward` sur un tenseur non scalaire lève `ContractError`."""
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ContractError):
        (x * 2.0).backward()


def test_softmax_rows_and_gradient(rng):
    """Teste que le softmax somme à 1 sur l'axe choisi et que d(Σ softmax) = 0."""
    x = Tensor(rng.normal(size=(3, 5)) * 10, requires_grad=True)
    y = softmax_axis(x, axis=-2)
    assert np.allclose(y.data.sum(axis=0), 1.0), "Chaque colonne devrait sommer à 1."
    y.sum().backward()
    assert np.allclose(x.grad, 0.0, atol=1e-12), "La somme d'un softmax est constante."


def test_softmax_is_stable_for_large_logits():
    """Teste l'absence de débordement pour des logits très grands."""
    y = softmax_axis(Tensor(np.array([[1000.0, 1000.0, -1000.0]])), axis=-1)
    assert np.all(np.isfinite(y.data)), "Le softmax devrait rester fini."
    assert np.allclose(y.data, [[0.5, 0.5, 0.0]]), "Les deux grands logits devraient se partager la masse."


def test_layernorm_normalizes_rows(rng):
    """Teste que la layernorm (gamma=1, beta=0) centre et réduit chaque ligne."""
    x = Tensor(rng.normal(3.0, 5.0, size=(4, 16)))
    y = layernorm(x, Tensor(np.ones(16)), Tensor(np.zeros(16)))
    assert np.allclose(y.data.mean(axis=-1), 0.0, atol=1e-10), "Moyenne par ligne non nulle."
    assert np.allclose(y.data.var(axis=-1), 1.0, atol=1e-3), "Variance par ligne différente de 1."


def test_gelu_reference_values():
    """Teste quelques valeurs de la GELU (approximation tanh)."""
    y = gelu(Tensor(np.array([0.0, 10.0, -10.0, 1.0])))
    expected_one = 0.5 * (1 + math.tanh(math.sqrt(2 / math.pi) * (1 + 0.044715)))
    assert np.allclose(y.data[:3], [0.0, 10.0, 0.0], atol=1e-6), "GELU(0)=0, GELU(±10)≈relu."
    assert math.isclose(y.data[3], expected_one, rel_tol=1e-12), "GELU(1) incorrecte."


def test_cross_entropy_uniform_oracle():
    """Teste la perte et le gradient pour des logits nuls : log K et (1/K − 1{y})/B."""
    logits = Tensor(np.zeros((2, 4)), requires_grad=True)
    loss = cross_entropy(logits, [1, 3])
    assert math.isclose(loss.item(), math.log(4)), "La perte devrait valoir log 4."
    loss.backward()
    expected = np.full((2, 4), 0.25)
    expected[0, 1] -= 1.0
    expected[1, 3] -= 1.0
    assert np.allclose(logits.grad, expected / 2), "Gradient de la cross-entropy incorrect."


def test_cross_entropy_rejects_bad_label():
    """Teste qu'un label hors de [0, K) lève `ValidationError`."""
    with pytest.raises(ValidationError):
        cross_entropy(Tensor(np.zeros((1, 3))), [3])


def test_concat_and_stack_split_gradients(rng):
    """Teste que concat et stack renvoient à chaque opérande sa part du gradient."""
    a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(1, 3)), requires_grad=True)
    (concat([a, b], axis=0) * np.arange(9.0).reshape(3, 3)).sum().backward()
    assert np.allclose(b.grad, [[6.0, 7.0, 8.0]]), "La dernière ligne revient à `b`."
    c = Tensor(rng.normal(size=(3,)), requires_grad=True)
    stack([c, c], axis=0).sum().backward()
    assert np.allclose(c.grad, 2.0), "Un tenseur empilé deux fois reçoit deux contributions."


def test_slicing_gradient(rng):
    """Teste le gradient d'une tranche : nul hors de la tranche."""
    x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    x[..., 1:3].sum().backward()
    expected = np.zeros((3, 4))
    expected[:, 1:3] = 1.0
    assert np.allclose(x.grad, expected), "Le gradient devrait être l'indicatrice de la tranche."


def test_check_gradients_on_composite(rng):
    """Teste que les gradients analytiques d'une composition passent le gradcheck."""
    x = Tensor(rng.normal(size=(5, 4)))
    w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    gamma = Tensor(rng.normal(size=(3,)) + 1.0, requires_grad=True)
    beta = Tensor(rng.normal(size=(3,)), requires_grad=True)
    weights = rng.normal(size=(5, 3))

    def loss_fn():
        h = layernorm(gelu(x @ w), gamma, beta)
        return (softmax_axis(h, axis=-2) * weights).sum()

    report = check_gradients(loss_fn, [("w", w), ("gamma", gamma), ("beta", beta)])
    assert report.passed, f"Gradcheck échoué : {report.to_frame()}"
    assert len(report.entries) == 3, "Un rapport par tenseur attendu."


def _composed_attention(x, params, n_heads):
    """Même calcul que `self_attention`, assemblé à partir des opérations élémentaires."""
    wq, bq, wk, bk, wv, bv, wo, bo = params
    b, l, d = x.shape
    dh = d // n_heads

    def split(t):
        return t.reshape(b, l, n_heads, dh).transpose(0, 2, 1, 3)

    q, k, v = split(x @ wq + bq), split(x @ wk + bk), split(x @ wv + bv)
    probs = softmax_axis((q @ k.T) * (1.0 / math.sqrt(dh)), axis=-1)
    return (probs @ v).transpose(0, 2, 1, 3).reshape(b, l, d) @ wo + bo


def _attention_params(rng, d, requires_grad=True):
    shapes = [(d, d), (d,)] * 4
    return [Tensor(rng.normal(scale=0.5, size=s), requires_grad=requires_grad) for s in shapes]


class TestFusedLayers:
    """Attention et FFN fusionnés : mêmes valeurs et gradients que leur composition."""

    @pytest.mark.parametrize("n_heads", [1, 2])
    def test_attention_matches_composition(self, rng, n_heads):
        """Teste sortie et gradients de `self_attention` contre la version composée."""
        x_np = rng.normal(size=(2, 5, 4))
        weights = rng.normal(size=(2, 5, 4))
        params = _attention_params(rng, 4)
        x = Tensor(x_np, requires_grad=True)
        fused = self_attention(x, *params, n_heads=n_heads)
        (fused * weights).sum().backward()
        fused_grads = [x.grad.copy()] + [p.grad.copy() for p in params]

        x_ref = Tensor(x_np, requires_grad=True)
        for p in params:
            p.zero_grad()
        composed = _composed_attention(x_ref, params, n_heads)
        (composed * weights).sum().backward()
        assert np.allclose(fused.data, composed.data, atol=1e-12), "Sorties différentes."
        for got, expected in zip(fused_grads, [x_ref.grad] + [p.grad for p in params]):
            assert np.allclose(got, expected, atol=1e-10), "Gradients différents."

    def test_feed_forward_matches_composition(self, rng):
        """Teste sortie et gradients de `feed_forward` contre `gelu(x·W1 + b1)·W2 + b2`."""
        x_np = rng.normal(size=(2, 3, 4))
        params = [Tensor(rng.normal(size=s), requires_grad=True) for s in [(4, 16), (16,), (16, 4), (4,)]]
        x = Tensor(x_np, requires_grad=True)
        fused = feed_forward(x, *params)
        (fused * fused).sum().backward()
        fused_grads = [x.grad.copy()] + [p.grad.copy() for p in params]

        x_ref = Tensor(x_np, requires_grad=True)
        for p in params:
            p.zero_grad()
        w1, b1, w2, b2 = params
        composed = gelu(x_ref @ w1 + b1) @ w2 + b2
        (composed * composed).sum().backward()
        assert np.allclose(fused.data, composed.data, atol=1e-12), "Sorties différentes."
        for got, expected in zip(fused_grads, [x_ref.grad] + [p.grad for p in params]):
            assert np.allclose(got, expected, atol=1e-10), "Gradients différents."

    def test_fused_layers_pass_gradcheck(self, rng):
        """Teste une couche attention + FFN fusionnée aux différences finies, entrée comprise."""
        x = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
        attn = _attention_params(rng, 4)
        ffn = [Tensor(rng.normal(scale=0.5, size=s), requires_grad=True) for s in [(4, 16), (16,), (16, 4), (4,)]]
        weights = rng.normal(size=(2, 3, 4))

        def loss_fn():
            h = x + self_attention(x, *attn, n_heads=2)
            return ((h + feed_forward(h, *ffn)) * weights).sum()

        names = ["wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "w1", "b1", "w2", "b2"]
        report = check_gradients(loss_fn, [("x", x)] + list(zip(names, attn + ffn)))
        assert report.passed, f"Gradcheck échoué : {report.to_frame()}"

    def test_frozen_weights_receive_no_gradient(self, rng):
        """Teste qu'avec des poids gelés seule l'entrée reçoit un gradient."""
        x = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
        attn = _attention_params(rng, 4, requires_grad=False)
        ffn = [Tensor(rng.normal(size=s)) for s in [(4, 16), (16,), (16, 4), (4,)]]
        feed_forward(self_attention(x, *attn, n_heads=2), *ffn).sum().backward()
        assert x.grad is not None and np.all(np.isfinite(x.grad)), "L'entrée devrait recevoir un gradient."
        assert all(p.grad is None for p in attn + ffn), "Les poids gelés ne devraient rien accumuler."

    def test_attention_rejects_indivisible_heads(self, rng):
        """Teste que d non divisible par le nombre de têtes lève `DimensionError`."""
        with pytest.raises(DimensionError):
            self_attention(Tensor(rng.normal(size=(1, 3, 4))), *_attention_params(rng, 4), n_heads=3)


class TestParamRegistry:
    """Tests du registre de paramètres."""

    def test_duplicate_name_rejected(self):
        """Teste qu'un nom déjà enregistré lève `ContractError`."""
        registry = ParamRegistry()
        registry.register("a", Tensor(np.zeros(2)), trainable=True)
        with pytest.raises(ContractError):
            registry.register("a", Tensor(np.zeros(2)), trainable=False)

    def test_counts_and_partition(self):
        """Teste les effectifs par statut et par préfixe."""
        registry = ParamRegistry()
        registry.register("layers.0.w", Tensor(np.zeros((2, 3))), trainable=False)
        registry.register("layers.0.petl.w", Tensor(np.zeros((3, 1))), trainable=True)
        registry.register("head.w", Tensor(np.zeros((3, 2))), trainable=True)
        assert registry.count() == 15, "Effectif total incorrect."
        assert registry.count(trainable=True) == 9, "Effectif entraînable incorrect."
        assert registry.count(prefix="head.") == 6, "Effectif de la tête incorrect."
        assert registry.frozen_names() == ["layers.0.w"], "Partition gelée incorrecte."

    def test_frozen_digest_tracks_frozen_values_only(self):
        """Teste que l'empreinte ne dépend que des valeurs gelées."""
        registry = ParamRegistry()
        frozen = registry.register("f", Tensor(np.ones(3)), trainable=False)
        train = registry.register("t", Tensor(np.ones(3)), trainable=True)
        digest = registry.frozen_digest()
        train.data += 1.0
        assert registry.frozen_digest() == digest, "Modifier un paramètre entraînable ne change pas l'empreinte."
        frozen.data[0] = 2.0
        assert registry.frozen_digest() != digest, "Modifier un paramètre gelé change l'empreinte."

    def test_strict_load_rejects_missing(self):
        """Teste qu'un chargement strict incomplet lève `ContractError`."""
        registry = ParamRegistry()
        registry.register("a", Tensor(np.zeros(2)), trainable=True)
        registry.register("b", Tensor(np.zeros(2)), trainable=True)
        with pytest.raises(ContractError):
            registry.load_state_dict({"a": np.ones(2)})
        with pytest.raises(DimensionError):
            registry.load_state_dict({"a": np.ones(3)}, strict=False)
