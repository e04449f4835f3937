"""Adaptateurs, mélanges d'adaptateurs (Dense/Soft-MoA) et encodeur de spectrogrammes.

Les modules suivants sont exposés pour faciliter les importations :
- `BottleneckAdapter`, `AdapterConfig` : l'expert.
- `DenseMoaLayer`, `SoftMoaLayer`, `RoutingTrace` : le routage.
- `SpectrogramEncoder`, `EncoderConfig`, `PetlConfig` : le modèle complet.
"""

# src/models/__init__.py
from .adapters import AdapterConfig, BottleneckAdapter, adapter_forward, adapter_param_count
from .moa import (
    DenseMoaLayer, SoftMoaLayer, RoutingTrace, MoaMode,
    router_gates, dense_moa_forward, dispatch_weights, combine_weights, soft_moa_forward,
    expert_contribution, per_class_contribution, moa_param_count,
)
from .encoder import EncoderConfig, PetlConfig, PetlKind, Placement, SpectrogramEncoder, param_partition

__all__ = [
    "AdapterConfig", "BottleneckAdapter", "adapter_forward", "adapter_param_count",
    "DenseMoaLayer", "SoftMoaLayer", "RoutingTrace", "MoaMode",
    "router_gates", "dense_moa_forward", "dispatch_weights", "combine_weights", "soft_moa_forward",
    "expert_contribution", "per_class_contribution", "moa_param_count",
    "EncoderConfig", "PetlConfig", "PetlKind", "Placement", "SpectrogramEncoder", "param_partition",
]
