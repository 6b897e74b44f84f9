"""Hypothesis-driven selective prediction for vesicle-pair connectivity."""

from .config import ExperimentConfig, load_config
from .errors import ChaseError, ConfigError, InvalidInputError, NumericalFailureError, UndefinedMetricError
from .harness import rescore_run, run_experiment, run_sweep

__all__ = [
	"ChaseError",
	"ConfigError",
	"ExperimentConfig",
	"InvalidInputError",
	"NumericalFailureError",
	"UndefinedMetricError",
	"load_config",
	"rescore_run",
	"run_experiment",
	"run_sweep",
]
