"""Single-branch comparison methods; each returns (prediction, accept score) like CHASE."""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from . import rng as rngs
from .errors import ConfigError
from .models.classifier import ClassifierModel
from .models.ensemble import committed_class

Scored = Tuple[np.ndarray, np.ndarray]


def _commit(probs: np.ndarray) -> Scored:
    return committed_class(probs), probs.max(axis=-1)


def msp_score(model: ClassifierModel, features: np.ndarray) -> Scored:
    """Maximum softmax probability of a deterministic forward pass."""

    return _commit(model.predict_proba(features))


def mc_dropout_passes(
    model: ClassifierModel, features: np.ndarray, passes: int = 20, seed: int | None = None
) -> np.ndarray:
    """Softmax outputs of ``passes`` stochastic forward passes, shape (passes, N, 2)."""

    if passes < 2:
        raise ConfigError(f"MC Dropout needs at least 2 passes, got {passes}.")
    seed = model.seed if seed is None else seed
    return np.stack(
        [
            model.predict_proba(features, rng=rngs.stream(seed, "dropout", "mc", index))
            for index in range(passes)
        ]
    )


def mc_dropout_score(
    model: ClassifierModel, features: np.ndarray, passes: int = 20, seed: int | None = None
) -> Scored:
    return _commit(mc_dropout_passes(model, features, passes, seed).mean(axis=0))


def deep_ensemble_score(models: Sequence[ClassifierModel], features: np.ndarray) -> Scored:
    if len(models) < 2:
        raise ConfigError(f"Deep Ensemble needs at least 2 members, got {len(models)}.")
    return _commit(np.mean([model.predict_proba(features) for model in models], axis=0))
