"""Single-branch GRU classifier behind the MSP, MC Dropout and Deep Ensemble baselines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .. import rng as rngs
from ..config import ClassifierConfig
from ..errors import InvalidInputError, InvalidShapeError
from ..numerics import (
    GRUCache,
    ParamSet,
    affine_backward,
    affine_forward,
    apply_mask,
    dropout_mask,
    gru_sequence_backward,
    gru_sequence_forward,
    init_affine,
    init_gru,
    softmax,
    softmax_cross_entropy,
)
from .training import Arrays, Schedule, TrainingLog, fit


@dataclass
class _ClassifierCache:
    gru: List[GRUCache]
    states: np.ndarray
    pooled: np.ndarray
    pooled_mask: np.ndarray | None
    head_hidden: np.ndarray
    head_mask: np.ndarray | None


class ClassifierModel:
    """GRU over all T frames, mean pooling, then a 64 -> 32 -> 2 head.

    Dropout (inverted) acts on the pooled state and on the head's hidden layer
    whenever a generator is supplied; with ``rng=None`` the model is deterministic.
    """

    def __init__(self, config: ClassifierConfig, params: ParamSet, seed: int):
        self.config = config
        self.params = params
        self.seed = seed

    @classmethod
    def initialize(cls, config: ClassifierConfig, seed: int | None = None) -> "ClassifierModel":
        seed = config.seed if seed is None else seed
        rng = rngs.stream(seed, "init", "classifier")
        params = ParamSet()
        init_gru(params, "gru", config.input_dim, config.hidden_size, rng)
        init_affine(params, "head1", config.hidden_size, config.head_hidden, rng)
        init_affine(params, "head2", config.head_hidden, 2, rng)
        return cls(config, params, seed)

    def _forward(
        self, features: np.ndarray, rng: np.random.Generator | None
    ) -> Tuple[np.ndarray, _ClassifierCache]:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[-1] != self.config.input_dim:
            raise InvalidShapeError(f"Expected (batch, T, {self.config.input_dim}) features, got {x.shape}.")
        if x.shape[1] < 1:
            raise InvalidInputError("Sequences must contain at least one frame.")

        states, caches = gru_sequence_forward(x, self.params, "gru")
        pooled = states.mean(axis=1)
        pooled_mask = dropout_mask(pooled.shape, self.config.dropout, rng)
        hidden = np.tanh(affine_forward(apply_mask(pooled, pooled_mask), self.params, "head1"))
        head_mask = dropout_mask(hidden.shape, self.config.dropout, rng)
        logits = affine_forward(apply_mask(hidden, head_mask), self.params, "head2")
        return logits, _ClassifierCache(caches, states, pooled, pooled_mask, hidden, head_mask)

    def predict_proba(self, features: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        logits, _ = self._forward(features, rng)
        return softmax(logits, axis=-1)

    def loss_and_grad(self, batch: Arrays, rng: np.random.Generator | None = None) -> float:
        features, labels = batch[0], batch[1]
        self.params.zero_grad()
        logits, cache = self._forward(features, rng)
        losses, d_logits = softmax_cross_entropy(logits, labels)
        d_logits = d_logits / len(labels)

        d_hidden = apply_mask(
            affine_backward(d_logits, apply_mask(cache.head_hidden, cache.head_mask), self.params, "head2"),
            cache.head_mask,
        )
        d_pre = d_hidden * (1.0 - cache.head_hidden**2)
        d_pooled = apply_mask(
            affine_backward(d_pre, apply_mask(cache.pooled, cache.pooled_mask), self.params, "head1"),
            cache.pooled_mask,
        )
        steps = cache.states.shape[1]
        d_states = np.repeat(d_pooled[:, None, :] / steps, steps, axis=1)
        gru_sequence_backward(d_states, cache.gru, self.params, "gru")
        return float(losses.mean())

    def evaluate_loss(self, arrays: Arrays) -> float:
        logits, _ = self._forward(arrays[0], None)
        losses, _ = softmax_cross_entropy(logits, arrays[1])
        return float(losses.mean())


def train_classifier(
    train: Arrays, validation: Arrays, config: ClassifierConfig, seed: int | None = None
) -> Tuple[ClassifierModel, TrainingLog]:
    """Cross-entropy training with the backbone's optimizer, epochs and patience."""

    seed = config.seed if seed is None else seed
    model = ClassifierModel.initialize(config, seed)
    schedule = Schedule(
        role="classifier",
        seed=seed,
        epochs=config.epochs,
        batch_size=config.batch_size,
        patience=config.patience,
        lr=config.lr,
    )
    log = fit(model, (train[0], train[1]), (validation[0], validation[1]), schedule)
    return model, log
