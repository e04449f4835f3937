# cli/commands/__init__.py
"""Sous-commandes de la CLI du laboratoire ; chaque module expose une commande click du même nom."""
