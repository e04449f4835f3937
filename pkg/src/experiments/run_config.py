# src/experiments/run_config.py
"""Description complète d'une expérience (RunConfig) et son chargement.

Deux formats de fichier :
- texte `clé=valeur`, une clé pointée par ligne, `#` pour les commentaires :

      encoder.d = 64
      encoder.petl.kind = soft_moa
      train.lr_max = 0.005
      task.seeds = 1,2,3

- YAML (`.yaml` / `.yml`), même arborescence.

Le hash SHA-256 des octets du fichier identifie le run et accompagne chaque
CSV produit.
"""

import hashlib
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError as PydanticValidationError, field_validator

from src.data.synthetic import SyntheticTaskSpec, TaskVariant
from src.error_management import ConfigError
from src.models.encoder import EncoderConfig, PetlKind
from src.training.trainer import TrainConfig

logger = logging.getLogger(__name__)

HASH_LENGTH = 16
LIST_KEYS = {"task.seeds", "bench.variants", "sweep.grid"}


# ------------------------------------------------------------------
# Sections
# ------------------------------------------------------------------
class TaskConfig(BaseModel):
    """Tâche synthétique ; F, T et le nombre de classes viennent de l'encodeur."""
    model_config = ConfigDict(extra="forbid")

    samples_per_class: int = Field(default=200, ge=1)
    sigma: float = Field(default=0.5, ge=0.0)
    blobs_per_class: int = Field(default=3, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    source_seed: int = Field(default=0, ge=0)
    test_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)


class DatasetConfig(BaseModel):
    """Fichiers SMDS1 remplaçant la tâche synthétique (`gen-data`)."""
    model_config = ConfigDict(extra="forbid")

    path: Optional[Path] = None
    test_path: Optional[Path] = None


class BackboneMode(str, Enum):
    RANDOM = "random"
    PRETRAINED = "pretrained"


class BackboneConfig(BaseModel):
    """`pretrained` : le backbone est d'abord entraîné sur la tâche source puis gelé."""
    model_config = ConfigDict(extra="forbid")

    mode: BackboneMode = BackboneMode.RANDOM
    path: Optional[Path] = None
    epochs: int = Field(default=10, ge=1)
    batch_size: int = Field(default=16, ge=1)
    lr_max: float = Field(default=2e-3, ge=0.0)


class BenchConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    variants: List[PetlKind] = Field(default_factory=lambda: [PetlKind.SINGLE, PetlKind.DENSE_MOA, PetlKind.SOFT_MOA])
    batch_size: Optional[int] = Field(default=None, ge=1)


class SweepMode(str, Enum):
    BUDGET = "budget"
    ADAPTERS = "adapters"
    SLOTS = "slots"


class SweepConfig(BaseModel):
    """Grille d'ablation : valeurs de r (budget), de N (adapters) ou couples N/p (slots)."""
    model_config = ConfigDict(extra="forbid")

    mode: SweepMode = SweepMode.SLOTS
    grid: List[str] = Field(default_factory=list)
    budget: Optional[int] = Field(default=None, ge=1)

    @field_validator("grid", mode="before")
    @classmethod
    def _as_strings(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            return [str(v) for v in value]
        return value


class AnalyzeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    layers: str = "all"


class RunConfig(BaseModel):
    """Expérience complète : modèle, entraînement, données, sortie."""
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    out: Path = Path("runs/default")
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    task: TaskConfig = Field(default_factory=TaskConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    analyze: AnalyzeConfig = Field(default_factory=AnalyzeConfig)

    _hash: str = PrivateAttr(default="")

    @property
    def config_hash(self) -> str:
        return self._hash

    def task_spec(self, seed: int, variant: TaskVariant = TaskVariant.TARGET) -> SyntheticTaskSpec:
        enc = self.encoder
        return SyntheticTaskSpec(
            n_classes=enc.n_classes, n_freq=enc.n_freq, n_frames=enc.n_frames,
            samples_per_class=self.task.samples_per_class, sigma=self.task.sigma,
            blobs_per_class=self.task.blobs_per_class, seed=seed, variant=variant,
            test_fraction=self.task.test_fraction,
        )

    def with_overrides(self, seed: Optional[int] = None, out: Optional[Path] = None) -> "RunConfig":
        """Copie avec graine (modèle et permutations) et/ou répertoire de sortie remplacés."""
        update: Dict[str, Any] = {}
        if seed is not None:
            update["seed"] = seed
            update["train"] = self.train.model_copy(update={"seed": seed})
        if out is not None:
            update["out"] = Path(out)
        copy = self.model_copy(update=update)
        copy._hash = self._hash
        return copy


# ------------------------------------------------------------------
# Lecture
# ------------------------------------------------------------------
def compute_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()[:HASH_LENGTH]


def parse_key_values(text: str) -> Dict[str, Any]:
    """Transforme des lignes `a.b.c = valeur` en dictionnaire imbriqué.

    Raises:
        ConfigError: Ligne sans `=`, clé vide ou dupliquée, conflit feuille/section.
    """
    tree: Dict[str, Any] = {}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"ligne {lineno} sans '=' : {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or any(not p for p in key.split(".")):
            raise ConfigError(f"clé vide ligne {lineno}", key=key)
        if key in seen:
            raise ConfigError(f"clé dupliquée ligne {lineno}", key=key)
        seen.add(key)
        parsed: Any = value
        if key in LIST_KEYS:
            parsed = [item.strip() for item in value.split(",") if item.strip()]
        node = tree
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError("une clé est à la fois valeur et section", key=key)
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigError("une clé est à la fois valeur et section", key=key)
        node[parts[-1]] = parsed
    return tree


def _first_error_key(error: PydanticValidationError) -> str:
    loc = error.errors()[0].get("loc", ())
    return ".".join(str(p) for p in loc)


def build_run_config(tree: Dict[str, Any], raw: bytes = b"") -> RunConfig:
    """Valide un arbre de clés en `RunConfig`.

    Raises:
        ConfigError: Clé inconnue ou valeur invalide ; `key` désigne la clé fautive.
    """
    try:
        config = RunConfig.model_validate(tree)
    except PydanticValidationError as exc:
        key = _first_error_key(exc)
        message = exc.errors()[0].get("msg", str(exc))
        raise ConfigError(f"configuration invalide : {message}", key=key or None) from None
    config._hash = compute_hash(raw)
    return config


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Lit un fichier `clé=valeur` ou YAML.

    Raises:
        ConfigError: Fichier illisible, syntaxe ou clé invalide.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"fichier de configuration illisible : {path} ({exc})") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ConfigError(f"fichier de configuration non UTF-8 : {path}") from None
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            tree = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"YAML invalide : {exc}") from None
        if not isinstance(tree, dict):
            raise ConfigError("le YAML doit décrire un dictionnaire")
    else:
        tree = parse_key_values(text)
    config = build_run_config(tree, raw)
    logger.info("run_config_loaded", extra={"path": str(path), "config_hash": config.config_hash})
    return config


def parse_layer_selector(selector: str, n_layers: int) -> List[int]:
    """`all`, `0,2` ou `1-3` → indices de couches triés.

    Raises:
        ConfigError: Sélecteur mal formé ou hors de [0, n_layers).
    """
    selector = selector.strip().lower()
    if selector in ("", "all"):
        return list(range(n_layers))
    chosen = set()
    try:
        for part in selector.split(","):
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                chosen.update(range(lo, hi + 1))
            else:
                chosen.add(int(part))
    except ValueError:
        raise ConfigError(f"sélecteur de couches invalide : {selector!r}", key="layers") from None
    if not chosen or min(chosen) < 0 or max(chosen) >= n_layers:
        raise ConfigError(f"couches hors de [0, {n_layers}) : {selector!r}", key="layers")
    return sorted(chosen)
