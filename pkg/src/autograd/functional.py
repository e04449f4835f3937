# src/autograd/functional.py
"""Primitives différentiables des couches : softmax, layernorm, activations, perte.

Chaque primitive calcule sa sortie avec numpy et fournit une rétropropagation
analytique ; les tests les comparent aux différences finies centrées.
"""

import math
from typing import Sequence, Tuple

import numpy as np

from src.autograd.tensor import Tensor, as_tensor, _normalize_axes
from src.error_management import DimensionError, ValidationError

LAYERNORM_EPS = 1e-5
GELU_COEF = 0.044715
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def softmax_axis(x: Tensor, axis: int) -> Tensor:
    """Softmax le long de `axis` (le maximum de l'axe est soustrait avant l'exponentielle).

    Raises:
        DimensionError: Si l'axe n'existe pas.
    """
    x = as_tensor(x)
    if x.ndim == 0:
        raise DimensionError(f"softmax_axis : axe {axis} invalide pour un scalaire", x.shape)
    (ax,) = _normalize_axes(axis, x.ndim)
    shifted = x.data - x.data.max(axis=ax, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=ax, keepdims=True)

    def backward(g: np.ndarray):
        return [(x, y * (g - (g * y).sum(axis=ax, keepdims=True)))]

    return Tensor._make(y, (x,), backward, "softmax")


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYERNORM_EPS) -> Tensor:
    """Normalisation par ligne sur le dernier axe, puis `gamma * x̂ + beta`.

    Raises:
        DimensionError: Si `gamma`/`beta` ne correspondent pas à la largeur d.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    d = x.shape[-1] if x.ndim else 0
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError("layernorm : largeur d incompatible", x.shape, gamma.shape, beta.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    y = xhat * gamma.data + beta.data
    lead = tuple(range(x.ndim - 1))

    def backward(g: np.ndarray):
        out = []
        if x.requires_grad:
            gx_hat = g * gamma.data
            gx = inv_std * (
                gx_hat
                - gx_hat.mean(axis=-1, keepdims=True)
                - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
            )
            out.append((x, gx))
        if gamma.requires_grad:
            out.append((gamma, (g * xhat).sum(axis=lead)))
        if beta.requires_grad:
            out.append((beta, g.sum(axis=lead)))
        return out

    return Tensor._make(y, (x, gamma, beta), backward, "layernorm")


def _gelu_forward(v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(GELU(v), tanh intermédiaire) ; deux allocations de la taille de `v`."""
    t = np.multiply(v, v, out=np.empty_like(v))
    t *= GELU_COEF
    t += 1.0
    t *= v
    t *= SQRT_2_OVER_PI
    np.tanh(t, out=t)
    y = np.add(t, 1.0, out=np.empty_like(v))
    y *= v
    y *= 0.5
    return y, t


def _gelu_slope(v: np.ndarray, t: np.ndarray) -> np.ndarray:
    """dGELU/dv = 0.5·(1 + t) + 0.5·v·(1 − t²)·√(2/π)·(1 + 3·0.044715·v²)."""
    s = np.multiply(v, v, out=np.empty_like(v))
    s *= 3.0 * GELU_COEF
    s += 1.0
    s *= v
    s *= 0.5 * SQRT_2_OVER_PI
    u = np.multiply(t, t, out=np.empty_like(t))
    np.subtract(1.0, u, out=u)
    u *= s
    np.multiply(t, 0.5, out=s)
    u += s
    u += 0.5
    return u


def gelu(x: Tensor) -> Tensor:
    """GELU, approximation tanh : 0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))."""
    x = as_tensor(x)
    v = x.data
    y, t = _gelu_forward(v)

    def backward(g: np.ndarray):
        return [(x, g * _gelu_slope(v, t))]

    return Tensor._make(y, (x,), backward, "gelu")


def self_attention(
        x: Tensor,
        wq: Tensor, bq: Tensor, wk: Tensor, bk: Tensor, wv: Tensor, bv: Tensor, wo: Tensor, bo: Tensor,
        n_heads: int,
) -> Tensor:
    """Attention multi-tête `B×L×d` en un seul nœud du graphe.

    Sortie : concat_h(softmax(Q_h·K_hᵀ/√d_h)·V_h)·W_o + b_o, avec Q = x·W_q + b_q
    (idem K et V). Seules les entrées avec `requires_grad` reçoivent un gradient.

    Raises:
        DimensionError: Si `x` n'est pas `B×L×d` ou si d n'est pas divisible par `n_heads`.
    """
    x = as_tensor(x)
    if x.ndim != 3 or x.shape[-1] != wq.shape[0] or x.shape[-1] % n_heads:
        raise DimensionError(f"self_attention : entrée B×L×d, d multiple de {n_heads}, attendue", x.shape, wq.shape)
    b, l, d = x.shape
    dh = d // n_heads
    scale = 1.0 / math.sqrt(dh)

    def split(block: np.ndarray) -> np.ndarray:
        return block.reshape(b, l, n_heads, dh).transpose(0, 2, 1, 3)

    def merge(heads: np.ndarray) -> np.ndarray:
        return heads.transpose(0, 2, 1, 3).reshape(b * l, d)

    x2 = x.data.reshape(b * l, d)
    w_qkv = np.concatenate([wq.data, wk.data, wv.data], axis=1)
    qkv = x2 @ w_qkv
    qkv += np.concatenate([bq.data, bk.data, bv.data])
    qkv[:, :d] *= scale
    q, k, v = split(qkv[:, :d]), split(qkv[:, d:2 * d]), split(qkv[:, 2 * d:])

    probs = q @ np.swapaxes(k, -1, -2)
    probs -= probs.max(axis=-1, keepdims=True)
    np.exp(probs, out=probs)
    probs /= probs.sum(axis=-1, keepdims=True)
    merged = merge(probs @ v)
    out = merged @ wo.data
    out += bo.data

    def backward(g: np.ndarray):
        g2 = g.reshape(b * l, d)
        grads = []
        if wo.requires_grad:
            grads.append((wo, merged.T @ g2))
        if bo.requires_grad:
            grads.append((bo, g2.sum(axis=0)))
        if not any(t.requires_grad for t in (x, wq, bq, wk, bk, wv, bv)):
            return grads
        d_mixed = split(g2 @ wo.data.T)
        d_v = merge(np.swapaxes(probs, -1, -2) @ d_mixed)
        d_scores = d_mixed @ np.swapaxes(v, -1, -2)
        d_scores -= np.einsum("...ij,...ij->...i", d_scores, probs)[..., None]
        d_scores *= probs
        d_q = merge(d_scores @ k)
        d_q *= scale
        d_k = merge(np.swapaxes(d_scores, -1, -2) @ q)
        d_qkv = np.concatenate([d_q, d_k, d_v], axis=1)
        if x.requires_grad:
            grads.append((x, (d_qkv @ w_qkv.T).reshape(b, l, d)))
        for i, (w, bias) in enumerate(((wq, bq), (wk, bk), (wv, bv))):
            block = d_qkv[:, i * d:(i + 1) * d]
            if w.requires_grad:
                grads.append((w, x2.T @ block))
            if bias.requires_grad:
                grads.append((bias, block.sum(axis=0)))
        return grads

    return Tensor._make(out.reshape(b, l, d), (x, wq, bq, wk, bk, wv, bv, wo, bo), backward, "self_attention")


def feed_forward(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    """`GELU(x·W1 + b1)·W2 + b2` en un seul nœud ; l'activation est calculée en place."""
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] != w1.shape[0] or w1.shape[1] != w2.shape[0]:
        raise DimensionError("feed_forward : largeurs incompatibles", x.shape, w1.shape, w2.shape)
    x2 = x.data.reshape(-1, x.shape[-1])
    pre = x2 @ w1.data
    pre += b1.data
    act, t = _gelu_forward(pre)
    out = act @ w2.data
    out += b2.data

    def backward(g: np.ndarray):
        g2 = g.reshape(-1, w2.shape[1])
        grads = []
        if w2.requires_grad:
            grads.append((w2, act.T @ g2))
        if b2.requires_grad:
            grads.append((b2, g2.sum(axis=0)))
        if not (x.requires_grad or w1.requires_grad or b1.requires_grad):
            return grads
        d_pre = g2 @ w2.data.T
        d_pre *= _gelu_slope(pre, t)
        if x.requires_grad:
            grads.append((x, (d_pre @ w1.data.T).reshape(x.shape)))
        if w1.requires_grad:
            grads.append((w1, x2.T @ d_pre))
        if b1.requires_grad:
            grads.append((b1, d_pre.sum(axis=0)))
        return grads

    return Tensor._make(out.reshape(*x.shape[:-1], w2.shape[1]), (x, w1, b1, w2, b2), backward, "feed_forward")


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g: np.ndarray):
        return [(x, g * mask)]

    return Tensor._make(np.where(mask, x.data, 0.0), (x,), backward, "relu")


def identity(x: Tensor) -> Tensor:
    return as_tensor(x)


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Moyenne sur le lot de −log softmax(logits)[label].

    Args:
        logits: Tenseur `B×K`.
        labels: B indices de classe dans [0, K).

    Raises:
        DimensionError: Si `logits` n'est pas `B×K` avec B = len(labels).
        ValidationError: Si un label est hors de [0, K).
    """
    logits = as_tensor(logits)
    labels_arr = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels_arr.shape[0]:
        raise DimensionError("cross_entropy : logits B×K attendus", logits.shape, labels_arr.shape)
    batch, n_classes = logits.shape
    bad = np.flatnonzero((labels_arr < 0) | (labels_arr >= n_classes))
    if bad.size:
        raise ValidationError(
            f"cross_entropy : label {int(labels_arr[bad[0]])} hors de [0, {n_classes}) à la position {int(bad[0])}"
        )
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = np.arange(batch)
    loss = -log_probs[rows, labels_arr].mean()

    def backward(g: np.ndarray):
        grad = np.exp(log_probs)
        grad[rows, labels_arr] -= 1.0
        return [(logits, grad * (float(g) / batch))]

    return Tensor._make(np.asarray(loss), (logits,), backward, "cross_entropy")


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Couche dense `x·W + b` (W de forme `in×out`)."""
    return x @ weight + bias
