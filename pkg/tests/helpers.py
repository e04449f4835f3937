# tests/helpers.py
"""Constructeurs partagés par les tests (configurations minuscules)."""
from src.models.encoder import EncoderConfig, PetlConfig, PetlKind

TINY_RUN = """
encoder.d = 8
encoder.n_layers = 1
encoder.n_heads = 2
encoder.n_freq = 8
encoder.n_frames = 8
encoder.patch_f = 4
encoder.patch_t = 4
encoder.n_classes = 3
encoder.petl.kind = soft_moa
encoder.petl.n_experts = 2
encoder.petl.r = 2
task.samples_per_class = 5
task.sigma = 0.1
train.epochs = 2
train.batch_size = 4
"""


def tiny_encoder(kind: PetlKind = PetlKind.SOFT_MOA, **overrides) -> EncoderConfig:
    """Encodeur 8×8 découpé en 4 tokens de largeur 8, une couche, deux têtes.

    Les clés `n_experts`, `slots_per_expert`, `r`, `init`, `houlsby_split` vont
    dans la configuration PETL ; les autres dans celle de l'encodeur.
    """
    petl_keys = {"n_experts", "slots_per_expert", "r", "init", "activation", "houlsby_split"}
    petl = {"n_experts": 2, "slots_per_expert": 1, "r": 2}
    petl.update({k: v for k, v in overrides.items() if k in petl_keys})
    encoder = dict(d=8, n_layers=1, n_heads=2, patch_f=4, patch_t=4, n_freq=8, n_frames=8, n_classes=3)
    encoder.update({k: v for k, v in overrides.items() if k not in petl_keys})
    return EncoderConfig(petl=PetlConfig(kind=kind, **petl), **encoder)
