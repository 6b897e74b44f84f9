"""Seed ensembles of backbones: averaging, cross-seed dispersion and probability fusion."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..config import BackboneConfig
from ..errors import ConfigError, InvalidShapeError
from ..logs import get_logger
from .backbone import BackboneOutput, DualHypothesisBackbone, backbone_forward, train_backbone
from .training import Arrays, TrainingLog

_LOGGER = get_logger(__name__)


class FusionWeight(BaseModel):
    """Scalar mixing weight alpha_f, restricted to the evenly spaced tuning grid."""

    alpha_f: float = Field(..., ge=0.0, le=1.0)
    grid_points: int = Field(21, ge=2)
    val_accuracy: Optional[float] = None

    @model_validator(mode="after")
    def _on_grid(self) -> "FusionWeight":
        position = self.alpha_f * (self.grid_points - 1)
        if abs(position - round(position)) > 1e-9:
            raise ValueError(f"alpha_f={self.alpha_f} is not one of the {self.grid_points} grid values.")
        return self


def fusion_grid(points: int = 21) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def committed_class(probs: np.ndarray, tie_break: int | None = None) -> np.ndarray:
    """argmax over the two classes; exact ties go to ``tie_break`` (class 0 when None)."""

    prediction = np.argmax(probs, axis=-1)
    if tie_break is not None:
        prediction = np.where(probs[..., 0] == probs[..., 1], tie_break, prediction)
    return prediction.astype(np.int64)


@dataclass(frozen=True)
class EnsembleSummary:
    """Seed-averaged distributions plus dispersion signals for N sequences."""

    pi_hyp: np.ndarray
    pi_aux: np.ndarray
    pi_fused: np.ndarray
    gap: np.ndarray
    sigma_hyp: np.ndarray
    sigma_aux: np.ndarray
    delta: np.ndarray
    prediction: np.ndarray
    alpha_f: float
    members: int

    def __len__(self) -> int:
        return len(self.prediction)


def _fuse(pi_hyp: np.ndarray, pi_aux: np.ndarray, alpha_f: float) -> np.ndarray:
    return alpha_f * pi_hyp + (1.0 - alpha_f) * pi_aux


def summarize(
    outputs: Sequence[BackboneOutput], alpha_f: float = 1.0, tie_break: int | None = None
) -> EnsembleSummary:
    """Combine per-seed outputs (same sequences, same order) into an ``EnsembleSummary``."""

    if not outputs:
        raise ConfigError("An ensemble needs at least one member (K >= 1).")
    sizes = {len(output) for output in outputs}
    if len(sizes) != 1:
        raise InvalidShapeError(f"Ensemble members scored different batch sizes: {sorted(sizes)}.")

    hyp = np.stack([output.pi_hyp for output in outputs])
    aux = np.stack([output.pi_aux for output in outputs])
    pi_hyp, pi_aux = hyp.mean(axis=0), aux.mean(axis=0)
    pi_fused = _fuse(pi_hyp, pi_aux, alpha_f)
    prediction = committed_class(pi_fused, tie_break)

    # Per-seed fused votes at the same alpha_f; the majority falls back to the
    # committed prediction when the vote is split evenly.
    votes = committed_class(_fuse(hyp, aux, alpha_f), tie_break)
    members = len(outputs)
    ones = votes.sum(axis=0)
    majority = np.where(2 * ones > members, 1, np.where(2 * ones < members, 0, prediction))
    delta = (votes != majority[None, :]).mean(axis=0)

    return EnsembleSummary(
        pi_hyp=pi_hyp,
        pi_aux=pi_aux,
        pi_fused=pi_fused,
        gap=np.stack([output.gap for output in outputs]).mean(axis=0),
        sigma_hyp=hyp[..., 0].std(axis=0),
        sigma_aux=aux[..., 0].std(axis=0),
        delta=delta,
        prediction=prediction,
        alpha_f=float(alpha_f),
        members=members,
    )


def collect_outputs(features: np.ndarray, models: Sequence[DualHypothesisBackbone]) -> List[BackboneOutput]:
    if not models:
        raise ConfigError("An ensemble needs at least one member (K >= 1).")
    return [backbone_forward(features, model) for model in models]


def ensemble_forward(
    features: np.ndarray,
    models: Sequence[DualHypothesisBackbone],
    alpha_f: float = 1.0,
    tie_break: int | None = None,
) -> EnsembleSummary:
    return summarize(collect_outputs(features, models), alpha_f, tie_break)


def tune_fusion_from_outputs(
    outputs: Sequence[BackboneOutput],
    labels: np.ndarray,
    grid_points: int = 21,
    tie_break: int | None = None,
) -> FusionWeight:
    """Grid-search alpha_f for validation no-abstain accuracy; ties prefer larger alpha_f."""

    if not outputs:
        raise ConfigError("An ensemble needs at least one member (K >= 1).")
    pi_hyp = np.mean([output.pi_hyp for output in outputs], axis=0)
    pi_aux = np.mean([output.pi_aux for output in outputs], axis=0)
    labels = np.asarray(labels, dtype=np.int64)

    best_alpha, best_accuracy = 1.0, -1.0
    for alpha in fusion_grid(grid_points)[::-1]:
        accuracy = float(np.mean(committed_class(_fuse(pi_hyp, pi_aux, alpha), tie_break) == labels))
        if accuracy > best_accuracy:
            best_alpha, best_accuracy = float(alpha), accuracy
    best_alpha = round(best_alpha * (grid_points - 1)) / (grid_points - 1)
    _LOGGER.debug("Tuned alpha_f=%.2f (val accuracy %.4f)", best_alpha, best_accuracy)
    return FusionWeight(alpha_f=best_alpha, grid_points=grid_points, val_accuracy=best_accuracy)


def tune_fusion(
    features: np.ndarray,
    labels: np.ndarray,
    models: Sequence[DualHypothesisBackbone],
    grid_points: int = 21,
    tie_break: int | None = None,
) -> FusionWeight:
    return tune_fusion_from_outputs(collect_outputs(features, models), labels, grid_points, tie_break)


def train_ensemble(
    train: Arrays,
    validation: Arrays,
    config: BackboneConfig,
    seeds: Sequence[int],
    workers: int = 1,
) -> List[Tuple[DualHypothesisBackbone, TrainingLog]]:
    """Train one backbone per seed; results come back in ``seeds`` order."""

    if not seeds:
        raise ConfigError("An ensemble needs at least one seed.")

    def _job(seed: int) -> Tuple[DualHypothesisBackbone, TrainingLog]:
        return train_backbone(train, validation, config, seed)

    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            return list(pool.map(_job, seeds))
    return [_job(seed) for seed in seeds]
