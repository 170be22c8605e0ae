# metriclab/experiments/__init__.py
from .base import (
    REGISTRY,
    ExperimentConfig,
    Report,
    Verdict,
    build_config,
    list_experiments,
    parse_config,
    run_experiment,
)

# registration side effects
from . import chain, curvature, extremal, invariance  # noqa: E402,F401

__all__ = [
    "REGISTRY",
    "ExperimentConfig",
    "Report",
    "Verdict",
    "build_config",
    "list_experiments",
    "parse_config",
    "run_experiment",
]
