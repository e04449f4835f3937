# src/autograd/registry.py
"""Registre des paramètres nommés d'un modèle.

Le registre est la source unique de vérité pour la partition gelé /
entraînable : un paramètre est entraînable si et seulement si son tenseur a
`requires_grad=True`. Les noms sont hiérarchiques (`layers.0.attn.w_q`).
"""

import hashlib
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from src.autograd.tensor import Tensor
from src.error_management import ContractError, DimensionError


class ParamRegistry:
    """Table ordonnée `nom -> Tensor` avec drapeau entraînable par nom."""

    def __init__(self) -> None:
        self._params: Dict[str, Tensor] = {}

    def register(self, name: str, tensor: Tensor, trainable: bool) -> Tensor:
        """Enregistre un paramètre sous un nom unique.

        Raises:
            ContractError: Si le nom ou le tenseur est déjà enregistré.
        """
        if name in self._params:
            raise ContractError(f"paramètre déjà enregistré : {name}")
        if any(t is tensor for t in self._params.values()):
            raise ContractError(f"tenseur déjà enregistré sous un autre nom : {name}")
        tensor.name = name
        tensor.requires_grad = bool(trainable)
        self._params[name] = tensor
        return tensor

    def set_trainable(self, name: str, trainable: bool) -> None:
        self[name].requires_grad = bool(trainable)

    # ------------------------------------------------------------------
    # Accès
    # ------------------------------------------------------------------
    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._params[name]
        except KeyError:
            raise ContractError(f"paramètre inconnu : {name}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> List[Tuple[str, Tensor]]:
        return list(self._params.items())

    def trainable_items(self) -> List[Tuple[str, Tensor]]:
        return [(n, t) for n, t in self._params.items() if t.requires_grad]

    def trainable_names(self) -> List[str]:
        return [n for n, t in self._params.items() if t.requires_grad]

    def frozen_names(self) -> List[str]:
        return [n for n, t in self._params.items() if not t.requires_grad]

    def count(self, trainable: Optional[bool] = None, prefix: Optional[str] = None) -> int:
        """Nombre de scalaires, filtré par statut et/ou préfixe de nom."""
        total = 0
        for name, tensor in self._params.items():
            if trainable is not None and tensor.requires_grad != trainable:
                continue
            if prefix is not None and not name.startswith(prefix):
                continue
            total += tensor.size
        return total

    # ------------------------------------------------------------------
    # Gradients et état
    # ------------------------------------------------------------------
    def zero_grad(self) -> None:
        """Remet à zéro les gradients des paramètres entraînables."""
        for _, tensor in self.trainable_items():
            tensor.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self._params.items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        """Copie les valeurs de `state` dans les paramètres existants.

        Raises:
            ContractError: Si `strict` et que les noms ne correspondent pas.
            DimensionError: Si une forme diffère.
        """
        if strict and set(state) != set(self._params):
            missing = sorted(set(self._params) - set(state))
            extra = sorted(set(state) - set(self._params))
            raise ContractError(f"état incompatible (manquants={missing[:3]}, inattendus={extra[:3]})")
        for name, values in state.items():
            if name not in self._params:
                continue
            tensor = self._params[name]
            if tuple(np.shape(values)) != tensor.shape:
                raise DimensionError(f"forme incompatible pour {name}", tensor.shape, np.shape(values))
            tensor.data[...] = values

    def frozen_digest(self) -> str:
        """Empreinte SHA-256 des valeurs gelées, dans l'ordre d'enregistrement."""
        h = hashlib.sha256()
        for name, tensor in self._params.items():
            if tensor.requires_grad:
                continue
            h.update(name.encode("utf-8"))
            h.update(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
        return h.hexdigest()
