# src/data/dataset_io.py
"""Format de fichier SMDS1 pour les jeux de spectrogrammes.

    "SMDS1" | u32 n_samples | u32 n_classes | u32 F | u32 T
    par échantillon : u32 label | F·T float32, row-major

Tout est little-endian. Les valeurs sont élargies en float64 au chargement.
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from src.data.synthetic import SpectrogramDataset
from src.error_management import DatasetFormatError

logger = logging.getLogger(__name__)

MAGIC = b"SMDS1"
HEADER = struct.Struct("<4I")
LABEL = struct.Struct("<I")
VALUE_DTYPE = np.dtype("<f4")


def encode_dataset(dataset: SpectrogramDataset) -> bytes:
    n_freq, n_frames = dataset.shape
    chunks = [MAGIC, HEADER.pack(len(dataset), dataset.n_classes, n_freq, n_frames)]
    for spec, label in zip(dataset.specs, dataset.labels):
        chunks.append(LABEL.pack(int(label)))
        chunks.append(np.ascontiguousarray(spec, dtype=VALUE_DTYPE).tobytes())
    return b"".join(chunks)


def save_dataset(dataset: SpectrogramDataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_dataset(dataset))
    logger.info("dataset_saved", extra={"path": str(path), "n_samples": len(dataset)})
    return path


def decode_dataset(data: bytes) -> SpectrogramDataset:
    """Décode un fichier SMDS1 complet.

    Raises:
        DatasetFormatError: Signature invalide, troncature, label ≥ n_classes ou
            octets excédentaires ; l'offset désigne le premier octet fautif.
    """
    if data[:len(MAGIC)] != MAGIC:
        raise DatasetFormatError("signature SMDS1 absente", 0)
    offset = len(MAGIC)
    if len(data) < offset + HEADER.size:
        raise DatasetFormatError("en-tête tronqué", len(data))
    n_samples, n_classes, n_freq, n_frames = HEADER.unpack_from(data, offset)
    offset += HEADER.size

    record = LABEL.size + n_freq * n_frames * VALUE_DTYPE.itemsize
    if len(data) < offset + n_samples * record:
        raise DatasetFormatError(
            f"fichier tronqué : {n_samples} échantillons de {record} octets annoncés, "
            f"{len(data) - offset} disponibles",
            len(data),
        )
    labels = np.empty(n_samples, dtype=np.int64)
    specs = np.empty((n_samples, n_freq, n_frames), dtype=np.float64)
    for i in range(n_samples):
        (label,) = LABEL.unpack_from(data, offset)
        if label >= n_classes:
            raise DatasetFormatError(f"label {label} ≥ n_classes={n_classes} (échantillon {i})", offset)
        values = np.frombuffer(data, dtype=VALUE_DTYPE, count=n_freq * n_frames, offset=offset + LABEL.size)
        labels[i] = label
        specs[i] = values.astype(np.float64).reshape(n_freq, n_frames)
        offset += record
    if offset != len(data):
        raise DatasetFormatError("octets excédentaires après le dernier échantillon", offset)
    return SpectrogramDataset(specs, labels, n_classes)


def load_dataset(path: Union[str, Path]) -> SpectrogramDataset:
    dataset = decode_dataset(Path(path).read_bytes())
    logger.info("dataset_loaded", extra={"path": str(path), "n_samples": len(dataset)})
    return dataset
