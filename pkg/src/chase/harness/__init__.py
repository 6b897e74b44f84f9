"""Experiment orchestration: folds, normalization, method wiring, runs, sweeps and reports."""

from .dispatcher import FoldDispatcher, FoldJob
from .experiment import ExperimentResult, rescore_run, run_experiment
from .folds import FoldSplit, fixed_split, make_folds
from .normalize import Normalizer, normalize_features
from .pipeline import FittedMethod, FoldData, MethodState, fit_method, prepare_fold, train_base_models
from .report import summary_frame, write_report
from .sweep import run_sweep
from .variants import BASELINES, VARIANTS, VariantSpec, effective_weights, method_spec

__all__ = [
	"BASELINES",
	"ExperimentResult",
	"FittedMethod",
	"FoldData",
	"FoldDispatcher",
	"FoldJob",
	"FoldSplit",
	"MethodState",
	"Normalizer",
	"VARIANTS",
	"VariantSpec",
	"effective_weights",
	"fit_method",
	"fixed_split",
	"make_folds",
	"method_spec",
	"normalize_features",
	"prepare_fold",
	"rescore_run",
	"run_experiment",
	"run_sweep",
	"summary_frame",
	"train_base_models",
	"write_report",
]
