"""Mini-batch Adam training with early stopping, shared by every trainable model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Protocol, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .. import rng as rngs
from ..errors import NumericalFailureError
from ..logs import get_logger
from ..numerics import OptimizerState, ParamSet, adam_step

_LOGGER = get_logger(__name__)

Arrays = Tuple[np.ndarray, ...]


class Trainable(Protocol):
    params: ParamSet

    def loss_and_grad(self, batch: Arrays, rng: np.random.Generator | None = None) -> float:
        """Zero, then populate ``params`` gradients for ``batch``; return the mean loss."""

    def evaluate_loss(self, arrays: Arrays) -> float:
        """Deterministic mean loss (dropout off) over ``arrays``."""


@dataclass(frozen=True)
class Schedule:
    role: str
    seed: int
    epochs: int
    batch_size: int
    patience: int
    lr: float = 1e-3


class TrainingLog(BaseModel):
    role: str
    seed: int
    epochs_run: int = 0
    best_epoch: int = -1
    best_val_loss: float = math.inf
    stopped_early: bool = False
    train_losses: List[float] = Field(default_factory=list)
    val_losses: List[float] = Field(default_factory=list)


def _ensure_finite(value: float, role: str, where: str) -> float:
    if not math.isfinite(value):
        raise NumericalFailureError(f"Training of {role} diverged", diagnostic=f"{where}: loss={value}")
    return value


def fit(model: Trainable, train: Arrays, validation: Arrays, schedule: Schedule) -> TrainingLog:
    """Train in place and restore the best-validation parameters before returning."""

    n = len(train[0])
    state = OptimizerState.for_params(model.params, lr=schedule.lr)
    order_rng = rngs.stream(schedule.seed, "sampling", schedule.role)
    dropout_rng = rngs.stream(schedule.seed, "dropout", schedule.role)
    log = TrainingLog(role=schedule.role, seed=schedule.seed)
    best = model.params.copy()
    wait = 0

    for epoch in range(schedule.epochs):
        order = order_rng.permutation(n)
        total = 0.0
        for start in range(0, n, schedule.batch_size):
            index = order[start : start + schedule.batch_size]
            batch = tuple(array[index] for array in train)
            loss = model.loss_and_grad(batch, rng=dropout_rng)
            _ensure_finite(loss, schedule.role, f"epoch {epoch} batch {start // schedule.batch_size}")
            adam_step(model.params, state)
            total += loss * len(index)
        val_loss = _ensure_finite(model.evaluate_loss(validation), schedule.role, f"epoch {epoch} validation")
        log.train_losses.append(total / n)
        log.val_losses.append(val_loss)
        log.epochs_run = epoch + 1
        _LOGGER.debug("%s epoch %d train=%.5f val=%.5f", schedule.role, epoch, total / n, val_loss)

        if val_loss < log.best_val_loss:
            log.best_val_loss = val_loss
            log.best_epoch = epoch
            best = model.params.copy()
            wait = 0
        else:
            wait += 1
            if wait >= schedule.patience:
                log.stopped_early = True
                break

    model.params.load(best)
    _LOGGER.info(
        "%s: best epoch %d/%d val=%.4f%s",
        schedule.role,
        log.best_epoch + 1,
        log.epochs_run,
        log.best_val_loss,
        " (early stop)" if log.stopped_early else "",
    )
    return log
