"""Dual-hypothesis backbone.

A shared GRU encodes x_1..x_{T-1}. Each class owns a Gaussian head that
predicts x_{t+1} from h_t; the time-averaged NLL of a head is that class's
score, lower meaning the class's dynamics explain the sequence better. An
auxiliary two-layer head classifies the mean-pooled hidden states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .. import rng as rngs
from ..config import BackboneConfig
from ..errors import InvalidInputError, InvalidShapeError
from ..labels import CONNECTED, NOT_CONNECTED
from ..numerics import (
    GRUCache,
    ParamSet,
    affine_backward,
    affine_forward,
    gaussian_nll,
    gaussian_nll_backward,
    gru_sequence_backward,
    gru_sequence_forward,
    init_affine,
    init_gru,
    softmax,
    softmax_cross_entropy,
)
from .training import Arrays, Schedule, TrainingLog, fit

_HEAD_FOR_CLASS = {CONNECTED: "head_c", NOT_CONNECTED: "head_n"}
_PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class BackboneOutput:
    """Per-sequence hypothesis scores and the two class distributions.

    ``scores[:, 0]`` is the connected head's score, ``scores[:, 1]`` the
    not-connected head's. ``pi_hyp`` is softmax(-scores).
    """

    scores: np.ndarray
    pi_hyp: np.ndarray
    pi_aux: np.ndarray

    @property
    def ell_c(self) -> np.ndarray:
        return self.scores[:, CONNECTED]

    @property
    def ell_n(self) -> np.ndarray:
        return self.scores[:, NOT_CONNECTED]

    @property
    def gap(self) -> np.ndarray:
        return self.ell_n - self.ell_c

    def __len__(self) -> int:
        return len(self.scores)

    def take(self, index: np.ndarray) -> "BackboneOutput":
        return BackboneOutput(self.scores[index], self.pi_hyp[index], self.pi_aux[index])

    @classmethod
    def from_scores(cls, scores: np.ndarray, pi_aux: np.ndarray) -> "BackboneOutput":
        return cls(scores=scores, pi_hyp=softmax(-scores, axis=-1), pi_aux=pi_aux)


@dataclass
class _ForwardCache:
    targets: np.ndarray
    states: np.ndarray
    gru: List[GRUCache]
    heads: Dict[str, Tuple[np.ndarray, np.ndarray]]
    pooled: np.ndarray
    aux_hidden: np.ndarray
    aux_logits: np.ndarray


def backbone_loss_terms(
    scores: np.ndarray, aux_logits: np.ndarray, labels: np.ndarray, config: BackboneConfig
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sequence loss and its gradients w.r.t. (scores, aux logits).

    loss = l^y + lambda_m * max(0, m - (l^ybar - l^y)) + lambda_c * CE(pi_aux, y)
    """

    rows = np.arange(len(labels))
    own = scores[rows, labels]
    other = scores[rows, 1 - labels]
    hinge = np.maximum(0.0, config.margin - (other - own))
    active = (hinge > 0.0).astype(np.float64)
    ce, d_logits = softmax_cross_entropy(aux_logits, labels)
    losses = own + config.lambda_margin * hinge + config.lambda_aux * ce

    d_scores = np.zeros_like(scores)
    d_scores[rows, labels] = 1.0 + config.lambda_margin * active
    d_scores[rows, 1 - labels] = -config.lambda_margin * active
    return losses, d_scores, config.lambda_aux * d_logits


def backbone_loss(output: BackboneOutput, labels: np.ndarray | int, config: BackboneConfig) -> float:
    """Mean of own-hypothesis NLL, margin hinge and auxiliary cross-entropy for a finished forward pass."""

    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if y.shape[0] != len(output):
        raise InvalidShapeError(f"{y.shape[0]} labels for {len(output)} outputs.")
    rows = np.arange(len(y))
    own = output.scores[rows, y]
    other = output.scores[rows, 1 - y]
    hinge = np.maximum(0.0, config.margin - (other - own))
    ce = -np.log(np.maximum(output.pi_aux[rows, y], _PROB_FLOOR))
    return float(np.mean(own + config.lambda_margin * hinge + config.lambda_aux * ce))


class DualHypothesisBackbone:
    """GRU encoder with per-class Gaussian next-frame heads and an auxiliary classifier."""

    def __init__(self, config: BackboneConfig, params: ParamSet):
        self.config = config
        self.params = params

    @classmethod
    def initialize(cls, config: BackboneConfig, seed: int | None = None) -> "DualHypothesisBackbone":
        seed = config.seed if seed is None else seed
        rng = rngs.stream(seed, "init", f"backbone:{config.hypotheses}")
        params = ParamSet()
        init_gru(params, "gru", config.input_dim, config.hidden_size, rng)
        for head in cls._heads_for(config):
            init_affine(params, head, config.hidden_size, 2 * config.input_dim, rng)
        init_affine(params, "aux1", config.hidden_size, config.aux_hidden, rng)
        init_affine(params, "aux2", config.aux_hidden, 2, rng)
        return cls(config, params)

    @staticmethod
    def _heads_for(config: BackboneConfig) -> Tuple[str, ...]:
        if config.hypotheses == "dual":
            return ("head_c", "head_n")
        return (_HEAD_FOR_CLASS[CONNECTED if config.hypotheses == "connected" else NOT_CONNECTED],)

    @property
    def heads(self) -> Tuple[str, ...]:
        return self._heads_for(self.config)

    def _validate(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[-1] != self.config.input_dim:
            raise InvalidShapeError(
                f"Expected (batch, T, {self.config.input_dim}) features, got {np.shape(features)}."
            )
        if x.shape[1] < 2:
            raise InvalidInputError(f"Sequences need at least 2 frames, got {x.shape[1]}.")
        return x

    def _forward(self, features: np.ndarray) -> Tuple[np.ndarray, _ForwardCache]:
        x = self._validate(features)
        inputs, targets = x[:, :-1, :], x[:, 1:, :]
        states, gru_caches = gru_sequence_forward(inputs, self.params, "gru")
        dim = self.config.input_dim

        head_scores: Dict[str, np.ndarray] = {}
        head_cache: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
        for head in self.heads:
            out = affine_forward(states, self.params, head)
            mu, logvar = out[..., :dim], out[..., dim:]
            head_scores[head] = gaussian_nll(targets, mu, logvar).mean(axis=1)
            head_cache[head] = (mu, logvar)

        if len(self.heads) == 2:
            scores = np.column_stack([head_scores["head_c"], head_scores["head_n"]])
        else:
            only = head_scores[self.heads[0]]
            scores = np.column_stack([only, only])

        pooled = states.mean(axis=1)
        aux_hidden = np.tanh(affine_forward(pooled, self.params, "aux1"))
        aux_logits = affine_forward(aux_hidden, self.params, "aux2")
        cache = _ForwardCache(targets, states, gru_caches, head_cache, pooled, aux_hidden, aux_logits)
        return scores, cache

    def forward(self, features: np.ndarray) -> BackboneOutput:
        scores, cache = self._forward(features)
        return BackboneOutput.from_scores(scores, softmax(cache.aux_logits, axis=-1))

    def loss_and_grad(self, batch: Arrays, rng: np.random.Generator | None = None) -> float:
        features, labels = batch[0], batch[1]
        self.params.zero_grad()
        scores, cache = self._forward(features)
        losses, d_scores, d_logits = backbone_loss_terms(scores, cache.aux_logits, labels, self.config)
        self._backward(d_scores / len(labels), d_logits / len(labels), cache)
        return float(losses.mean())

    def evaluate_loss(self, arrays: Arrays) -> float:
        scores, cache = self._forward(arrays[0])
        losses, _, _ = backbone_loss_terms(scores, cache.aux_logits, arrays[1], self.config)
        return float(losses.mean())

    def _backward(self, d_scores: np.ndarray, d_logits: np.ndarray, cache: _ForwardCache) -> None:
        steps = cache.states.shape[1]
        d_states = np.zeros_like(cache.states)

        if len(self.heads) == 2:
            per_head = {"head_c": d_scores[:, CONNECTED], "head_n": d_scores[:, NOT_CONNECTED]}
        else:
            per_head = {self.heads[0]: d_scores.sum(axis=1)}
        for head, d_ell in per_head.items():
            mu, logvar = cache.heads[head]
            d_nll = np.repeat(d_ell[:, None] / steps, steps, axis=1)
            d_mu, d_logvar = gaussian_nll_backward(d_nll, cache.targets, mu, logvar)
            d_out = np.concatenate([d_mu, d_logvar], axis=-1)
            d_states += affine_backward(d_out, cache.states, self.params, head)

        d_aux_hidden = affine_backward(d_logits, cache.aux_hidden, self.params, "aux2")
        d_aux_pre = d_aux_hidden * (1.0 - cache.aux_hidden**2)
        d_pooled = affine_backward(d_aux_pre, cache.pooled, self.params, "aux1")
        d_states += d_pooled[:, None, :] / steps

        gru_sequence_backward(d_states, cache.gru, self.params, "gru")


def backbone_forward(features: np.ndarray, model: DualHypothesisBackbone) -> BackboneOutput:
    """Score one (T, 6) sequence or a (B, T, 6) batch."""

    return model.forward(features)


def train_backbone(
    train: Arrays, validation: Arrays, config: BackboneConfig, seed: int | None = None
) -> Tuple[DualHypothesisBackbone, TrainingLog]:
    """Fit a fresh backbone on ``(features, labels)`` arrays; early-stops on validation loss."""

    seed = config.seed if seed is None else seed
    model = DualHypothesisBackbone.initialize(config, seed)
    schedule = Schedule(
        role=f"backbone[{config.hypotheses}]",
        seed=seed,
        epochs=config.epochs,
        batch_size=config.batch_size,
        patience=config.patience,
        lr=config.lr,
    )
    log = fit(model, (train[0], train[1]), (validation[0], validation[1]), schedule)
    return model, log


__all__ = [
    "BackboneOutput",
    "DualHypothesisBackbone",
    "backbone_forward",
    "backbone_loss",
    "backbone_loss_terms",
    "train_backbone",
]
