"""Instrumentation du chemin adaptateur et modèle de coût en FLOPs."""
from .counters import FlopCounter, count_flops
from .flops import FlopReport, flop_model

__all__ = ["FlopCounter", "count_flops", "FlopReport", "flop_model"]
