"""Evaluation metrics and significance testing."""

from .selective import (
	OVERALL,
	SUBSETS,
	VERY_HIGH,
	MetricReport,
	ScoredPredictions,
	abstain_alignment,
	evaluate_subsets,
	metric_report,
	no_abstain_accuracy,
	risk_at_coverage,
	risk_coverage_curve,
	three_way_accuracy,
)
from .wilcoxon import signed_rank_statistic, wilcoxon_one_sided

__all__ = [
	"MetricReport",
	"OVERALL",
	"SUBSETS",
	"ScoredPredictions",
	"VERY_HIGH",
	"abstain_alignment",
	"evaluate_subsets",
	"metric_report",
	"no_abstain_accuracy",
	"risk_at_coverage",
	"risk_coverage_curve",
	"signed_rank_statistic",
	"three_way_accuracy",
	"wilcoxon_one_sided",
]
