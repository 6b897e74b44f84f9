"""Trainable models: dual-hypothesis backbone, seed ensembles, selector and classifier."""

from .backbone import (
	BackboneOutput,
	DualHypothesisBackbone,
	backbone_forward,
	backbone_loss,
	train_backbone,
)
from .classifier import ClassifierModel, train_classifier
from .ensemble import (
	EnsembleSummary,
	FusionWeight,
	collect_outputs,
	committed_class,
	ensemble_forward,
	summarize,
	train_ensemble,
	tune_fusion,
	tune_fusion_from_outputs,
)
from .selector import (
	SELECTOR_FEATURES,
	CostAwareSelector,
	CrossFitSelector,
	SelectorSample,
	accept_cost,
	accept_scores,
	build_features,
	calibrate_threshold,
	make_samples,
	rank_loss,
	selector_loss,
	train_crossfit_selector,
	train_selector,
)
from .training import Schedule, TrainingLog, fit

__all__ = [
	"BackboneOutput",
	"ClassifierModel",
	"CostAwareSelector",
	"CrossFitSelector",
	"DualHypothesisBackbone",
	"EnsembleSummary",
	"FusionWeight",
	"SELECTOR_FEATURES",
	"Schedule",
	"SelectorSample",
	"TrainingLog",
	"accept_cost",
	"accept_scores",
	"backbone_forward",
	"backbone_loss",
	"build_features",
	"calibrate_threshold",
	"collect_outputs",
	"committed_class",
	"ensemble_forward",
	"fit",
	"make_samples",
	"rank_loss",
	"selector_loss",
	"summarize",
	"train_backbone",
	"train_classifier",
	"train_ensemble",
	"train_crossfit_selector",
	"train_selector",
	"tune_fusion",
	"tune_fusion_from_outputs",
]
