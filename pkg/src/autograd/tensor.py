# src/autograd/tensor.py
"""Tenseur float64 participant à un graphe de différentiation automatique (mode inverse).

Chaque opération crée un nouveau `Tensor` qui mémorise ses parents et une
fermeture `_backward` : reçue le gradient de la sortie, elle renvoie la liste
des contributions `(parent, gradient)`. `Tensor.backward()` parcourt le graphe
dans l'ordre topologique inverse. Les gradients des feuilles s'accumulent
d'un appel à l'autre jusqu'à `zero_grad()`.

Les opérations acceptent des dimensions de lot en tête (ex: `B×L×d`) ; les
formes décrites dans la documentation (`L×d`) sont le cas sans lot.
"""

from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.error_management import ContractError, DimensionError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], List[Tuple["Tensor", np.ndarray]]]

DTYPE = np.float64


class Tensor:
    """Tableau float64 étiqueté par sa forme, avec gradient optionnel.

    Attributes:
        data: Les valeurs (row-major, float64).
        requires_grad: Si True, `backward` remplit `grad`.
        grad: Tampon de gradient de même forme que `data`, ou None.
        name: Nom hiérarchique (renseigné par le `ParamRegistry`).
    """

    def __init__(
            self,
            data: ArrayLike,
            requires_grad: bool = False,
            name: Optional[str] = None,
            _parents: Tuple["Tensor", ...] = (),
            _backward: Optional[BackwardFn] = None,
            _op: str = "",
    ) -> None:
        if isinstance(data, Tensor):
            data = data.data
        # Les feuilles copient leurs valeurs ; les nœuds internes réutilisent le tableau calculé.
        self.data: np.ndarray = np.asarray(data, dtype=DTYPE) if _op else np.array(data, dtype=DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    # ------------------------------------------------------------------
    # Propriétés
    # ------------------------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def T(self) -> "Tensor":
        """Échange les deux derniers axes."""
        return swap_last(self)

    def numpy(self) -> np.ndarray:
        """Retourne une copie des valeurs."""
        return self.data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() exige un tenseur à un élément, forme {list(self.shape)}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Copie hors graphe (sans gradient)."""
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f"{self.name}, " if self.name else ""
        return f"Tensor({label}shape={list(self.shape)}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # Construction de nœuds
    # ------------------------------------------------------------------
    @staticmethod
    def _make(data: np.ndarray, parents: Tuple["Tensor", ...], backward: BackwardFn, op: str) -> "Tensor":
        requires_grad = any(p.requires_grad for p in parents)
        if not requires_grad:
            return Tensor(data, _op=op)
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward, _op=op)

    # ------------------------------------------------------------------
    # Rétropropagation
    # ------------------------------------------------------------------
    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        """Rétropropage depuis une perte scalaire.

        Les gradients s'accumulent dans `grad` tant qu'ils ne sont pas remis à zéro.

        Raises:
            ContractError: Si le tenseur n'est pas scalaire.
        """
        if self.size != 1:
            raise ContractError(f"backward() exige une perte scalaire, forme reçue {list(self.shape)}")
        if not self.requires_grad:
            return
        pending = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            node.grad = g.copy() if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in node._backward(g):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg

    # ------------------------------------------------------------------
    # Opérateurs
    # ------------------------------------------------------------------
    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return take(self, index)

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        return reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def as_tensor(value: ArrayLike) -> Tensor:
    """Enveloppe une constante en `Tensor` (sans gradient)."""
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Somme `grad` sur les axes diffusés pour retrouver `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op} : formes non diffusables", a.shape, b.shape) from None


# ------------------------------------------------------------------
# Opérations élémentaires
# ------------------------------------------------------------------
def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def backward(g: np.ndarray):
        return [(a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape))]

    return Tensor._make(a.data + b.data, (a, b), backward, "add")


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def backward(g: np.ndarray):
        return [(a, _unbroadcast(g, a.shape)), (b, _unbroadcast(-g, b.shape))]

    return Tensor._make(a.data - b.data, (a, b), backward, "sub")


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def backward(g: np.ndarray):
        out = []
        if a.requires_grad:
            out.append((a, _unbroadcast(g * b.data, a.shape)))
        if b.requires_grad:
            out.append((b, _unbroadcast(g * a.data, b.shape)))
        return out

    return Tensor._make(a.data * b.data, (a, b), backward, "mul")


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)

    def backward(g: np.ndarray):
        out = []
        if a.requires_grad:
            out.append((a, _unbroadcast(g / b.data, a.shape)))
        if b.requires_grad:
            out.append((b, _unbroadcast(-g * a.data / (b.data ** 2), b.shape)))
        return out

    return Tensor._make(a.data / b.data, (a, b), backward, "div")


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Produit matriciel `[..., m×k] · [..., k×n] -> [..., m×n]` (lots diffusés).

    Raises:
        DimensionError: Si les dimensions internes diffèrent.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul : dimensions internes incompatibles", a.shape, b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError("matmul : dimensions de lot incompatibles", a.shape, b.shape) from None

    def backward(g: np.ndarray):
        out = []
        if a.requires_grad:
            out.append((a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)))
        if b.requires_grad:
            out.append((b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)))
        return out

    return Tensor._make(np.matmul(a.data, b.data), (a, b), backward, "matmul")


# ------------------------------------------------------------------
# Réductions et manipulations de forme
# ------------------------------------------------------------------
def _normalize_axes(axis: Optional[Union[int, Tuple[int, ...]]], ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    normalized = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise DimensionError(f"axe {ax} hors limites pour un tenseur de rang {ndim}")
        normalized.append(ax % ndim)
    return tuple(normalized)


def reduce_sum(x: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)

    def backward(g: np.ndarray):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return [(x, np.broadcast_to(g, x.shape).copy())]

    return Tensor._make(x.data.sum(axis=axes, keepdims=keepdims), (x,), backward, "sum")


def reduce_mean(x: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1

    def backward(g: np.ndarray):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return [(x, np.broadcast_to(g / count, x.shape).copy())]

    return Tensor._make(x.data.mean(axis=axes, keepdims=keepdims), (x,), backward, "mean")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise DimensionError("reshape : nombre d'éléments incompatible", x.shape, tuple(shape)) from None

    def backward(g: np.ndarray):
        return [(x, g.reshape(x.shape))]

    return Tensor._make(out, (x,), backward, "reshape")


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    if sorted(a % x.ndim for a in axes) != list(range(x.ndim)):
        raise DimensionError(f"transpose : permutation {axes} invalide", x.shape)
    inverse = tuple(np.argsort([a % x.ndim for a in axes]))

    def backward(g: np.ndarray):
        return [(x, np.transpose(g, inverse))]

    return Tensor._make(np.transpose(x.data, axes), (x,), backward, "transpose")


def swap_last(x: Tensor) -> Tensor:
    """Transpose les deux derniers axes (`Xᵀ` pour une matrice)."""
    if x.ndim < 2:
        raise DimensionError("swap_last exige un tenseur de rang ≥ 2", x.shape)
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def take(x: Tensor, index) -> Tensor:
    """Indexation numpy (tranches, entiers) différentiable."""
    out = x.data[index]
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(p, (slice, int, type(Ellipsis))) for p in parts)

    def backward(g: np.ndarray):
        full = np.zeros_like(x.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return [(x, full)]

    return Tensor._make(np.array(out, dtype=DTYPE), (x,), backward, "take")


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    """Concatène des tenseurs le long de `axis`."""
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ContractError("concat exige au moins un tenseur")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise DimensionError("concat : formes incompatibles", *(p.shape for p in parts)) from None
    sizes = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g: np.ndarray):
        return list(zip(parts, np.split(g, sizes, axis=axis)))

    return Tensor._make(out, tuple(parts), backward, "concat")


def stack(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    """Empile des tenseurs de même forme le long d'un nouvel axe."""
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ContractError("stack exige au moins un tenseur")
    if any(p.shape != parts[0].shape for p in parts):
        raise DimensionError("stack : formes différentes", *(p.shape for p in parts))
    out = np.stack([p.data for p in parts], axis=axis)

    def backward(g: np.ndarray):
        return [(p, np.take(g, i, axis=axis)) for i, p in enumerate(parts)]

    return Tensor._make(out, tuple(parts), backward, "stack")
