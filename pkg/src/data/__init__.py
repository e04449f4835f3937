"""Tâches synthétiques de spectrogrammes et format de fichier SMDS1."""
from .synthetic import SpectrogramDataset, SyntheticTaskSpec, TaskVariant, generate, stratified_split
from .dataset_io import load_dataset, save_dataset

__all__ = [
    "SpectrogramDataset", "SyntheticTaskSpec", "TaskVariant", "generate", "stratified_split",
    "load_dataset", "save_dataset",
]
