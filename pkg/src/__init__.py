# src/__init__.py
"""Laboratoire Dense/Soft Mixture-of-Adapters.

Bibliothèque du projet : différentiation automatique (`autograd`), adaptateurs
et routage (`models`), données synthétiques (`data`), entraînement
(`training`), mesures (`bench`) et expériences (`experiments`).
"""

__version__ = "0.1.0"
