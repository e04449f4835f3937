# tests/test_encoder.py
"""Tests unitaires de l'encodeur de spectrogrammes et de ses blocs PETL."""
import numpy as np
import pytest
from pydantic import ValidationError as PydanticValidationError

from src.autograd import gradcheck
from src.error_management import ValidationError
from src.models.adapters import InitScheme
from src.models.encoder import (
    EncoderConfig, PetlConfig, PetlKind, Placement, SpectrogramEncoder, extract_patches, param_counts,
    param_partition, patchify,
)
from tests.helpers import tiny_encoder

pytestmark = pytest.mark.unit

ALL_KINDS = [PetlKind.NONE, PetlKind.SINGLE, PetlKind.DENSE_MOA, PetlKind.SOFT_MOA]


def test_extract_patches_order():
    """Teste le découpage en patchs : fréquence puis temps, valeurs aplaties ligne par ligne."""
    spec = np.arange(64.0).reshape(8, 8)
    patches = extract_patches(spec[None], 4, 4)
    assert patches.shape == (1, 4, 16), "4 patchs de 16 valeurs attendus."
    assert np.array_equal(patches[0, 0], spec[:4, :4].reshape(-1)), "Premier patch incorrect."
    assert np.array_equal(patches[0, 1], spec[:4, 4:].reshape(-1)), "Le deuxième patch avance dans le temps."
    assert np.array_equal(patches[0, 2], spec[4:, :4].reshape(-1)), "Le troisième patch avance en fréquence."


def test_extract_patches_rejects_non_divisible():
    """Teste qu'un spectrogramme non divisible par la taille de patch lève `ValidationError`."""
    with pytest.raises(ValidationError):
        extract_patches(np.zeros((1, 8, 6)), 4, 4)


def test_config_rejects_bad_heads():
    """Teste qu'un d non divisible par le nombre de têtes est refusé."""
    with pytest.raises(PydanticValidationError):
        EncoderConfig(d=10, n_heads=4)


def test_houlsby_split_requires_houlsby_placement():
    """Teste que le partage 7 + 7 exige le placement Houlsby."""
    with pytest.raises(PydanticValidationError):
        EncoderConfig(petl=PetlConfig(kind=PetlKind.SOFT_MOA, n_experts=4, houlsby_split=True))


@pytest.mark.parametrize("kind", [PetlKind.SINGLE, PetlKind.DENSE_MOA, PetlKind.SOFT_MOA])
def test_zero_init_is_transparent_at_step_zero(kind, tiny_dataset):
    """Teste qu'à l'initialisation, le modèle adapté donne exactement les logits du linear probe."""
    specs = tiny_dataset.specs[:3]
    adapted = SpectrogramEncoder(tiny_encoder(kind), seed=4).forward(specs).data
    probe = SpectrogramEncoder(tiny_encoder(PetlKind.NONE), seed=4).forward(specs).data
    assert np.array_equal(adapted, probe), "Les blocs PETL initialisés à zéro devraient être transparents."


def test_backbone_shared_across_variants():
    """Teste que le backbone ne dépend que de la graine, pas de la variante PETL."""
    single = SpectrogramEncoder(tiny_encoder(PetlKind.SINGLE), seed=9).registry
    soft = SpectrogramEncoder(tiny_encoder(PetlKind.SOFT_MOA), seed=9).registry
    for name in ("patch.w", "pos", "layers.0.attn.wq", "layers.0.ffn.w2", "head.w"):
        assert np.array_equal(single[name].data, soft[name].data), f"{name} devrait être identique."


def test_partition_freezes_backbone(tiny_config):
    """Teste que seuls les blocs PETL et la tête sont entraînables."""
    model = SpectrogramEncoder(tiny_config)
    for name in model.registry.trainable_names():
        assert name.startswith("head.") or ".petl_" in name, f"{name} ne devrait pas être entraînable."
    frozen, trainable = param_partition(tiny_config)
    assert model.registry.frozen_names() == frozen, "Partition gelée différente de l'inventaire."
    assert model.registry.trainable_names() == trainable, "Partition entraînable différente de l'inventaire."


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("placement", [Placement.PFEIFFER, Placement.HOULSBY])
def test_registry_counts_match_inventory(kind, placement):
    """Teste que les effectifs du registre égalent l'inventaire analytique."""
    config = tiny_encoder(kind, placement=placement)
    registry = SpectrogramEncoder(config).registry
    counts = param_counts(config)
    assert registry.count(trainable=True) == counts["trainable"], "Effectif entraînable incorrect."
    assert registry.count(trainable=False) == counts["frozen"], "Effectif gelé incorrect."
    assert registry.count(prefix="head.") == counts["head"], "Effectif de la tête incorrect."


def test_houlsby_doubles_sites_and_split_halves_experts():
    """Teste que Houlsby ajoute un bloc après la FFN et que le partage répartit N/2 experts par bloc."""
    pfeiffer = SpectrogramEncoder(tiny_encoder(PetlKind.SOFT_MOA, n_experts=2))
    houlsby = SpectrogramEncoder(tiny_encoder(PetlKind.SOFT_MOA, n_experts=2, placement=Placement.HOULSBY))
    split = SpectrogramEncoder(
        tiny_encoder(PetlKind.SOFT_MOA, n_experts=2, placement=Placement.HOULSBY, houlsby_split=True),
    )
    assert list(pfeiffer.petl_blocks()) == ["layers.0.petl_attn"], "Pfeiffer : un bloc par couche."
    assert list(houlsby.petl_blocks()) == ["layers.0.petl_attn", "layers.0.petl_ffn"], "Houlsby : deux blocs."
    assert all(b.n_experts == 1 for b in split.petl_blocks().values()), "Le partage donne N/2 experts par bloc."


def test_attention_rows_are_distributions(tiny_config, tiny_dataset):
    """Teste que chaque ligne de probabilités d'attention somme à 1."""
    model = SpectrogramEncoder(tiny_config)
    tokens = model.layers[0].ln1(patchify(tiny_dataset.specs[:2], model.embedding))
    probs = model.layers[0].attn.attention_probs(tokens)
    assert probs.shape == (2, 2, 4, 4), "Forme B×H×L×L attendue."
    assert np.allclose(probs.data.sum(axis=-1), 1.0), "Chaque ligne d'attention devrait sommer à 1."


def test_predict_shapes(tiny_config, tiny_dataset):
    """Teste les formes des logits et des prédictions."""
    model = SpectrogramEncoder(tiny_config)
    assert model.forward(tiny_dataset.specs[:5]).shape == (5, 3), "Logits B×K attendus."
    assert model.predict(tiny_dataset.specs[:5]).shape == (5,), "Une prédiction par échantillon."


@pytest.mark.parametrize("kind", [PetlKind.SINGLE, PetlKind.DENSE_MOA, PetlKind.SOFT_MOA])
def test_model_gradcheck(kind, tiny_dataset):
    """Teste les gradients de bout en bout (experts initialisés aléatoirement)."""
    model = SpectrogramEncoder(tiny_encoder(kind, init=InitScheme.RANDOM, slots_per_expert=2), seed=1)
    batch = (tiny_dataset.specs[[0, 5]], tiny_dataset.labels[[0, 5]])
    report = gradcheck(model, batch)
    assert report.passed, f"Gradcheck échoué :\n{report.to_frame()}"
    assert {e.name for e in report.entries} == set(model.registry.trainable_names()), \
        "Tous les paramètres entraînables devraient être vérifiés."


def test_gradcheck_with_unfrozen_backbone(tiny_dataset):
    """Teste les gradients des poids du backbone (attention et FFN fusionnés) une fois dégelé."""
    model = SpectrogramEncoder(tiny_encoder(PetlKind.NONE), seed=1)
    model.unfreeze_backbone()
    batch = (tiny_dataset.specs[[0, 5]], tiny_dataset.labels[[0, 5]])
    report = gradcheck(model, batch)
    assert report.passed, f"Gradcheck échoué :\n{report.to_frame()}"
    assert "layers.0.attn.wq" in report.by_name() and "layers.0.ffn.w1" in report.by_name(), \
        "Les poids du backbone devraient être vérifiés."


class TestReferenceShape:
    """Effectifs à la taille d'AST (d=768, 12 couches, tête 31 classes)."""

    def test_single_adapter(self):
        """Teste l'effectif de l'adaptateur unique r=24."""
        counts = param_counts(EncoderConfig.reference_shape(PetlConfig(kind=PetlKind.SINGLE, r=24)))
        assert counts["petl"] == 451_872, "Effectif PETL de Single(r=24) incorrect."
        assert counts["head"] == 23_839, "Effectif de la tête incorrect."

    @pytest.mark.parametrize("kind", [PetlKind.SOFT_MOA, PetlKind.DENSE_MOA])
    def test_mixtures(self, kind):
        """Teste l'effectif des mélanges 14 experts r=1."""
        counts = param_counts(EncoderConfig.reference_shape(PetlConfig(kind=kind, n_experts=14, r=1)))
        assert counts["petl"] == 516_264, f"Effectif PETL de {kind.value} incorrect."
        assert counts["trainable"] == 516_264 + 23_839, "La tête s'ajoute aux paramètres PETL."

    def test_houlsby_split_matches_pfeiffer_budget_order(self):
        """Teste que le partage 7 + 7 en Houlsby garde le même coût expert que 14 experts en Pfeiffer."""
        split = param_counts(EncoderConfig.reference_shape(
            PetlConfig(kind=PetlKind.SOFT_MOA, n_experts=14, r=1, houlsby_split=True), placement=Placement.HOULSBY,
        ))
        assert split["petl"] == 516_264, "7 experts × 2 sites = 14 experts, Φ compris."
