"""Différentiation automatique en mode inverse sur des tenseurs float64.

Les modules suivants sont exposés pour faciliter les importations :
- `Tensor` et les opérations de base (`matmul`, `concat`, `stack`...).
- Les primitives de couches (`softmax_axis`, `layernorm`, `gelu`, `cross_entropy`),
  dont l'attention et le FFN fusionnés (`self_attention`, `feed_forward`).
- `ParamRegistry` et `gradcheck`.
"""
from .tensor import Tensor, as_tensor, matmul, concat, stack, swap_last
from .functional import (
    softmax_axis, layernorm, gelu, relu, cross_entropy, linear, self_attention, feed_forward,
)
from .registry import ParamRegistry
from .gradcheck import gradcheck, check_gradients, GradcheckReport

__all__ = [
    "Tensor", "as_tensor", "matmul", "concat", "stack", "swap_last",
    "softmax_axis", "layernorm", "gelu", "relu", "cross_entropy", "linear", "self_attention", "feed_forward",
    "ParamRegistry", "gradcheck", "check_gradients", "GradcheckReport",
]
