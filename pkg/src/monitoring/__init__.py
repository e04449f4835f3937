# src/monitoring/__init__.py
"""Journalisation structurée du laboratoire.

- `configure_logging` : installe le formateur JSON (python-json-logger) sur le logger `src`.
"""
from .structured_logger import configure_logging

__all__ = ['configure_logging']
