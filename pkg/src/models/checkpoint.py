# src/models/checkpoint.py
"""Format de checkpoint SMOA1.

Disposition (entiers little-endian) :

    "SMOA1"
    u32 longueur_meta | méta-données JSON UTF-8 (config encodeur, hash de run)
    u32 n_entrées
    par entrée : u16 longueur_nom | nom UTF-8 | u8 rang | u32 × rang | u8 entraînable
    charges utiles float64 little-endian, dans l'ordre du manifeste

Toute incohérence lève `CheckpointFormatError` avec l'offset fautif ; aucune
lecture partielle n'est renvoyée.
"""

import json
import logging
import math
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import numpy as np

from src.error_management import CheckpointFormatError, ValidationError
from src.models.encoder import EncoderConfig, SpectrogramEncoder

logger = logging.getLogger(__name__)

MAGIC = b"SMOA1"
PAYLOAD_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    metadata: Dict[str, Any] = field(default_factory=dict)
    tensors: "OrderedDict[str, Tuple[np.ndarray, bool]]" = field(default_factory=OrderedDict)

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: array for name, (array, _) in self.tensors.items()}

    def encoder_config(self) -> EncoderConfig:
        if "encoder" not in self.metadata:
            raise ValidationError("checkpoint sans configuration d'encodeur")
        return EncoderConfig.model_validate(self.metadata["encoder"])


# ------------------------------------------------------------------
# Écriture
# ------------------------------------------------------------------
def encode_checkpoint(entries: Iterable[Tuple[str, np.ndarray, bool]], metadata: Optional[Dict[str, Any]] = None) -> bytes:
    entries = list(entries)
    meta = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", len(meta)), meta, struct.pack("<I", len(entries))]
    for name, array, trainable in entries:
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(struct.pack("<B", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(struct.pack("<B", int(bool(trainable))))
    for _, array, _ in entries:
        chunks.append(np.ascontiguousarray(array, dtype=PAYLOAD_DTYPE).tobytes())
    return b"".join(chunks)


def save_checkpoint(model: SpectrogramEncoder, path: Union[str, Path], metadata: Optional[Dict[str, Any]] = None) -> Path:
    """Écrit tous les paramètres du modèle et sa configuration."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"encoder": model.config.model_dump(mode="json"), "seed": model.seed, **(metadata or {})}
    entries = [(name, tensor.data, tensor.requires_grad) for name, tensor in model.registry.items()]
    path.write_bytes(encode_checkpoint(entries, meta))
    logger.info("checkpoint_saved", extra={"path": str(path), "n_tensors": len(entries)})
    return path


# ------------------------------------------------------------------
# Lecture
# ------------------------------------------------------------------
class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise CheckpointFormatError(f"fichier tronqué en lisant {what}", self.offset)
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str, what: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(data: bytes) -> Checkpoint:
    reader = _Reader(data)
    if reader.take(len(MAGIC), "l'en-tête") != MAGIC:
        raise CheckpointFormatError("signature SMOA1 absente", 0)
    (meta_len,) = reader.unpack("<I", "la longueur des méta-données")
    meta_offset = reader.offset
    try:
        metadata = json.loads(reader.take(meta_len, "les méta-données").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointFormatError("méta-données JSON illisibles", meta_offset) from None

    (n_entries,) = reader.unpack("<I", "le nombre d'entrées")
    manifest = []
    for _ in range(n_entries):
        name_offset = reader.offset
        (name_len,) = reader.unpack("<H", "la longueur d'un nom")
        try:
            name = reader.take(name_len, "un nom").decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointFormatError("nom de tenseur non UTF-8", name_offset) from None
        (ndim,) = reader.unpack("<B", "un rang")
        shape = reader.unpack(f"<{ndim}I", "une forme") if ndim else ()
        (flag,) = reader.unpack("<B", "un drapeau entraînable")
        if flag not in (0, 1):
            raise CheckpointFormatError(f"drapeau entraînable invalide ({flag})", reader.offset - 1)
        manifest.append((name, tuple(shape), bool(flag)))

    tensors: "OrderedDict[str, Tuple[np.ndarray, bool]]" = OrderedDict()
    for name, shape, trainable in manifest:
        size = math.prod(shape) * PAYLOAD_DTYPE.itemsize
        if size > len(data) - reader.offset:
            raise CheckpointFormatError(
                f"forme {shape} de {name} plus grande que les {len(data) - reader.offset} octets restants",
                reader.offset,
            )
        raw = reader.take(size, f"la charge utile de {name}")
        tensors[name] = (np.frombuffer(raw, dtype=PAYLOAD_DTYPE).astype(np.float64).reshape(shape), trainable)
    if reader.offset != len(data):
        raise CheckpointFormatError("octets excédentaires après les charges utiles", reader.offset)
    return Checkpoint(metadata=metadata, tensors=tensors)


def read_checkpoint(path: Union[str, Path]) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())


def load_checkpoint(path: Union[str, Path]) -> Tuple[SpectrogramEncoder, Checkpoint]:
    """Reconstruit le modèle décrit par le checkpoint et y charge les poids et les drapeaux."""
    checkpoint = read_checkpoint(path)
    model = SpectrogramEncoder(checkpoint.encoder_config(), seed=int(checkpoint.metadata.get("seed", 0)))
    model.registry.load_state_dict(checkpoint.state_dict(), strict=True)
    for name, (_, trainable) in checkpoint.tensors.items():
        model.registry.set_trainable(name, trainable)
    return model, checkpoint


def load_backbone(model: SpectrogramEncoder, path: Union[str, Path]) -> None:
    """Copie les poids du backbone d'un checkpoint dans `model` puis les gèle.

    Raises:
        ValidationError: Si un paramètre du backbone manque ou change de forme.
    """
    state = read_checkpoint(path).state_dict()
    names = model.backbone_names()
    missing = [n for n in names if n not in state]
    if missing:
        raise ValidationError(f"backbone incomplet dans {path} : {missing[:3]}")
    model.registry.load_state_dict({n: state[n] for n in names}, strict=False)
    model.freeze_backbone()
    logger.info("backbone_loaded", extra={"path": str(path), "n_tensors": len(names)})
