# src/error_management.py
"""Gestion centralisée des erreurs du laboratoire MoA.

Ce module définit la hiérarchie d'exceptions partagée par la bibliothèque
(autograd, adaptateurs, routage, encodeur, entraînement, données) ainsi qu'un
gestionnaire de contexte qui journalise les exceptions non gérées avec leur
contexte avant de les propager. La CLI convertit ces exceptions en codes de
sortie (voir `exit_code_for`).
"""

import logging
import traceback
from typing import Any, Optional, Sequence, Type

logger = logging.getLogger(__name__)

# Codes de sortie de la CLI.
EXIT_OK = 0
EXIT_NUMERIC_FAILURE = 1
EXIT_CONFIG_ERROR = 2


# ------------------------------------------------------------------
# Exceptions personnalisées
# ------------------------------------------------------------------
class MoaLabError(Exception):
    """Exception de base pour toutes les erreurs du laboratoire."""
    pass


class DimensionError(MoaLabError):
    """Levée lorsque deux formes de tenseurs ne sont pas compatibles."""

    def __init__(self, message: str, *shapes: Sequence[int]) -> None:
        self.shapes = tuple(tuple(s) for s in shapes)
        if self.shapes:
            message = f"{message} (formes : {' vs '.join(str(list(s)) for s in self.shapes)})"
        super().__init__(message)


class ValidationError(MoaLabError):
    """Levée lorsqu'une valeur d'entrée viole une précondition (label, dimensions, taille)."""
    pass


class ContractError(MoaLabError):
    """Levée lorsqu'un contrat d'appel n'est pas respecté (ex: backward sur un non-scalaire)."""
    pass


class NumericError(MoaLabError):
    """Levée lorsqu'une perte ou un gradient n'est pas fini.

    Attributes:
        parameter: Le nom du paramètre fautif, si connu.
    """

    def __init__(self, message: str, parameter: Optional[str] = None) -> None:
        self.parameter = parameter
        if parameter:
            message = f"{message} [paramètre : {parameter}]"
        super().__init__(message)


class FormatError(MoaLabError):
    """Erreur de format binaire, avec la position (en octets) de l'anomalie."""

    def __init__(self, message: str, offset: int) -> None:
        self.offset = offset
        super().__init__(f"{message} (octet {offset})")


class DatasetFormatError(FormatError):
    """Fichier de dataset SMDS1 invalide ou tronqué."""
    pass


class CheckpointFormatError(FormatError):
    """Fichier de checkpoint SMOA1 invalide ou tronqué."""
    pass


class ConfigError(MoaLabError):
    """Clé ou valeur invalide dans un fichier de configuration de run."""

    def __init__(self, message: str, key: Optional[str] = None) -> None:
        self.key = key
        if key:
            message = f"{message} : `{key}`"
        super().__init__(message)


def exit_code_for(error: BaseException) -> int:
    """Traduit une exception en code de sortie CLI."""
    if isinstance(error, (ConfigError, ValidationError, FormatError)):
        return EXIT_CONFIG_ERROR
    if isinstance(error, (NumericError, ContractError, DimensionError)):
        return EXIT_NUMERIC_FAILURE
    return EXIT_NUMERIC_FAILURE


# ------------------------------------------------------------------
# Gestionnaire de Contexte pour les Erreurs
# ------------------------------------------------------------------
class ErrorContext:
    """Gestionnaire de contexte qui journalise les exceptions non gérées puis les propage.

    Utilisation:
    ```python
    with ErrorContext("train", config_hash="ab12cd34"):
        train(model, dataset, cfg)
    ```
    """

    def __init__(self, operation: str, **kwargs: Any) -> None:
        """Initialise le contexte d'erreur.

        Args:
            operation: Le nom de l'opération en cours (pour le logging).
            **kwargs: Contexte supplémentaire à journaliser avec l'erreur.
        """
        self.operation = operation
        self.context = kwargs

    def __enter__(self) -> "ErrorContext":
        return self

    def __exit__(self, exc_type: Optional[Type[BaseException]], exc_val: Optional[BaseException], exc_tb: Optional[Any]) -> bool:
        if exc_val is not None:
            logger.error(
                "operation_failed",
                extra={
                    "operation": self.operation,
                    "context": self.context,
                    "error_type": exc_type.__name__ if exc_type else "UnknownError",
                    "error_message": str(exc_val),
                    "stack_trace": "".join(traceback.format_exception(exc_type, exc_val, exc_tb)),
                },
            )
        return False  # L'exception est toujours propagée.
