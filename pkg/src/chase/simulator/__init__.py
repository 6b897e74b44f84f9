"""Vesicle-pair simulator and dataset generation."""

from .dataset import (
	DatasetManifest,
	SequenceRecord,
	SequenceTable,
	generate_dataset,
	read_dataset,
	simulate_pair,
	write_dataset,
)
from .dynamics import PairTrajectory, integrate_pair
from .features import extract_features
from .profiles import ActivityProfile, sample_activity_profile

__all__ = [
	"ActivityProfile",
	"DatasetManifest",
	"PairTrajectory",
	"SequenceRecord",
	"SequenceTable",
	"extract_features",
	"generate_dataset",
	"integrate_pair",
	"read_dataset",
	"sample_activity_profile",
	"simulate_pair",
	"write_dataset",
]
