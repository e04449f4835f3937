# tests/__init__.py
"""Suite de tests du laboratoire MoA.

Marqueurs : `unit` (rapides, modèles minuscules), `integration` (CLI et
pipelines complets), `slow` (convergence et benchmark de référence).
"""
