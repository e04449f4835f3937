"""Pipelines d'expériences : configuration de run, adaptation, balayages, analyses."""
from .run_config import RunConfig, load_run_config, parse_layer_selector
from .adaptation import ExperimentOutcome, run_experiment, run_task
from .sweep import run_sweep
from .analysis import ContributionReport, analyze_contributions
from .diagnostics import run_benchmark, run_gradcheck

__all__ = [
    "RunConfig", "load_run_config", "parse_layer_selector",
    "ExperimentOutcome", "run_experiment", "run_task",
    "run_sweep", "ContributionReport", "analyze_contributions",
    "run_benchmark", "run_gradcheck",
]
