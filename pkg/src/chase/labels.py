"""Label, regime and decision constants used for deterministic routing of records."""

from typing import Literal

CONNECTED = 0
NOT_CONNECTED = 1
ABSTAIN = -1

LABEL_NAMES = ("connected", "not_connected")
LabelName = Literal["connected", "not_connected"]

INTERMITTENT = "intermittent"
SHORT_LOCAL = "short_local"
REGIMES = (INTERMITTENT, SHORT_LOCAL)
RegimeName = Literal["intermittent", "short_local"]

AMBIGUITY_BINS = ((0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0))
AMBIGUOUS_THRESHOLD = 0.75

FEATURE_NAMES = (
    "euclidean_distance",
    "distance_change",
    "relative_motion",
    "spatial_support_count",
    "median_bridge_score",
    "median_bridge_width",
)
N_FEATURES = len(FEATURE_NAMES)


def label_index(name: str) -> int:
    try:
        return LABEL_NAMES.index(name)
    except ValueError as exc:
        raise ValueError(f"Unknown label '{name}'.") from exc


def ambiguity_bin(alpha: float) -> int:
    """Index of the generation stratum containing ``alpha``; the last bin is closed."""

    for index, (low, high) in enumerate(AMBIGUITY_BINS):
        if low <= alpha < high:
            return index
    return len(AMBIGUITY_BINS) - 1


def is_ambiguous(alpha: float) -> bool:
    return alpha >= AMBIGUOUS_THRESHOLD
