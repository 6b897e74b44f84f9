"""Selective-prediction metrics on committed predictions and accept scores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..errors import InvalidInputError, InvalidShapeError, UndefinedMetricError
from ..labels import ABSTAIN

OVERALL = "O"
VERY_HIGH = "VH"
SUBSETS = (OVERALL, VERY_HIGH)


def _nonempty(array: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(array)
    if values.size == 0:
        raise InvalidInputError(f"{what} needs at least one sequence.")
    return values


@dataclass(frozen=True)
class ScoredPredictions:
    """A method's committed predictions and accept scores with ground truth attached."""

    prediction: np.ndarray
    labels: np.ndarray
    ambiguous: np.ndarray
    scores: np.ndarray

    def __post_init__(self) -> None:
        columns = (self.prediction, self.labels, self.ambiguous, self.scores)
        shapes = {np.shape(column) for column in columns}
        if len(shapes) != 1:
            raise InvalidShapeError(f"Scored prediction columns differ in shape: {sorted(shapes)}.")

    def __len__(self) -> int:
        return len(self.prediction)

    def subset(self, mask: np.ndarray) -> "ScoredPredictions":
        return ScoredPredictions(
            self.prediction[mask], self.labels[mask], self.ambiguous[mask], self.scores[mask]
        )

    def decide(self, tau: float) -> np.ndarray:
        """Final three-way decision: the prediction when s >= tau, otherwise ABSTAIN."""

        return np.where(self.scores >= tau, self.prediction, ABSTAIN)

    @classmethod
    def concatenate(cls, parts: list["ScoredPredictions"]) -> "ScoredPredictions":
        return cls(
            np.concatenate([part.prediction for part in parts]),
            np.concatenate([part.labels for part in parts]),
            np.concatenate([part.ambiguous for part in parts]),
            np.concatenate([part.scores for part in parts]),
        )


def no_abstain_accuracy(prediction: np.ndarray, labels: np.ndarray) -> float:
    """Accuracy when every sequence is committed."""

    prediction = _nonempty(prediction, "no-abstain accuracy")
    return float(np.mean(prediction == np.asarray(labels)))


def risk_at_coverage(scored: ScoredPredictions, tau: float) -> Tuple[float, float]:
    """(error rate among s >= tau, realized coverage)."""

    _nonempty(scored.scores, "risk@coverage")
    accepted = scored.scores >= tau
    count = int(accepted.sum())
    if count == 0:
        raise UndefinedMetricError(f"No sequence accepted at tau={tau}.")
    errors = int(np.sum(scored.prediction[accepted] != scored.labels[accepted]))
    return errors / count, count / len(scored)


def three_way_accuracy(decisions: np.ndarray, labels: np.ndarray, ambiguous: np.ndarray) -> float:
    """Committed-and-right or abstained-on-ambiguous, over all sequences."""

    decisions = _nonempty(decisions, "three-way accuracy")
    abstained = decisions == ABSTAIN
    correct = np.where(abstained, np.asarray(ambiguous, dtype=bool), decisions == np.asarray(labels))
    return float(np.mean(correct))


def abstain_alignment(decisions: np.ndarray, ambiguous: np.ndarray) -> float:
    """Share of abstentions that land on ambiguous sequences."""

    abstained = np.asarray(decisions) == ABSTAIN
    count = int(abstained.sum())
    if count == 0:
        raise UndefinedMetricError("No abstentions; abstain alignment is undefined.")
    return int(np.sum(np.asarray(ambiguous, dtype=bool)[abstained])) / count


def _defined(compute: Callable[[], float]) -> Optional[float]:
    try:
        return compute()
    except (UndefinedMetricError, InvalidInputError):
        return None


class MetricReport(BaseModel):
    """The four metrics on one subset at one calibrated threshold. ``None`` marks undefined."""

    subset: str = OVERALL
    target_coverage: float = Field(..., gt=0, le=1)
    tau: float
    n: int = Field(..., ge=0)
    realized_coverage: Optional[float] = None
    no_abstain_acc: Optional[float] = None
    risk_at_coverage: Optional[float] = None
    three_way_acc: Optional[float] = None
    abstain_alignment: Optional[float] = None


def metric_report(scored: ScoredPredictions, tau: float, target: float, subset: str = OVERALL) -> MetricReport:
    decisions = scored.decide(tau)
    risk = _defined(lambda: risk_at_coverage(scored, tau)[0])
    return MetricReport(
        subset=subset,
        target_coverage=target,
        tau=float(tau),
        n=len(scored),
        realized_coverage=float(np.mean(decisions != ABSTAIN)) if len(scored) else None,
        no_abstain_acc=_defined(lambda: no_abstain_accuracy(scored.prediction, scored.labels)),
        risk_at_coverage=risk,
        three_way_acc=_defined(lambda: three_way_accuracy(decisions, scored.labels, scored.ambiguous)),
        abstain_alignment=_defined(lambda: abstain_alignment(decisions, scored.ambiguous)),
    )


def evaluate_subsets(scored: ScoredPredictions, tau: float, target: float) -> Dict[str, MetricReport]:
    """Reports on all test sequences (O) and on the ambiguous subset (VH)."""

    very_high = scored.subset(np.asarray(scored.ambiguous, dtype=bool))
    return {
        OVERALL: metric_report(scored, tau, target, OVERALL),
        VERY_HIGH: metric_report(very_high, tau, target, VERY_HIGH),
    }


def risk_coverage_curve(scored: ScoredPredictions) -> Tuple[np.ndarray, np.ndarray]:
    """Coverage and risk at every distinct threshold, from the highest score down."""

    scores = _nonempty(scored.scores, "risk-coverage curve")
    order = np.argsort(-scores, kind="stable")
    wrong = (scored.prediction[order] != scored.labels[order]).astype(np.int64)
    sorted_scores = scores[order]
    # Cut only after the last member of each tie group.
    last_of_group = np.append(sorted_scores[1:] != sorted_scores[:-1], True)
    accepted = np.arange(1, len(scores) + 1)[last_of_group]
    errors = np.cumsum(wrong)[last_of_group]
    return accepted / len(scores), errors / accepted
