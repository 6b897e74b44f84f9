"""Cost-aware pairwise selector.

The selector reads ensemble summaries phi(x) and emits a raw score r that should
be high for sequences the system ought not to commit on. Its target is the
budgeted accept cost max(E, gamma * a); two pairwise ranking terms push errors
and costly commitments above the rest. Commitment happens when the accept score
s = 1 - sigmoid(r) clears a threshold calibrated for a target coverage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import entr, expit
from sklearn.model_selection import KFold, StratifiedKFold, train_test_split

from .. import rng as rngs
from ..config import SelectorConfig
from ..errors import ConfigError, InvalidInputError, InvalidShapeError
from ..logs import get_logger
from ..numerics import (
    ParamSet,
    affine_backward,
    affine_forward,
    apply_mask,
    binary_cross_entropy_with_logits,
    dropout_mask,
    init_affine,
    sigmoid,
    softplus,
)
from .ensemble import EnsembleSummary
from .training import Arrays, Schedule, TrainingLog, fit

_LOGGER = get_logger(__name__)

SELECTOR_FEATURES = (
    "pi_hyp_pred",
    "pi_aux_pred",
    "pi_fused_pred",
    "gap",
    "abs_gap",
    "sigma_hyp",
    "sigma_aux",
    "delta",
    "fused_entropy",
)
N_SELECTOR_FEATURES = len(SELECTOR_FEATURES)
AUX_FEATURES = ("pi_aux_pred", "sigma_aux")
_STD_FLOOR = 1e-6


def build_features(summary: EnsembleSummary, include_aux: bool = True) -> np.ndarray:
    """phi for every sequence, shape (N, 9), in ``SELECTOR_FEATURES`` order.

    With ``include_aux=False`` the auxiliary-head columns are zeroed.
    """

    rows = np.arange(len(summary))
    pred = summary.prediction
    phi = np.column_stack(
        [
            summary.pi_hyp[rows, pred],
            summary.pi_aux[rows, pred],
            summary.pi_fused[rows, pred],
            summary.gap,
            np.abs(summary.gap),
            summary.sigma_hyp,
            summary.sigma_aux,
            summary.delta,
            entr(summary.pi_fused).sum(axis=-1),
        ]
    )
    if not include_aux:
        for name in AUX_FEATURES:
            phi[:, SELECTOR_FEATURES.index(name)] = 0.0
    return phi


def accept_cost(error, ambiguous, gamma: float):
    """y_cost = max(E, gamma * a); accepts scalars or arrays."""

    return np.maximum(np.asarray(error, dtype=np.float64), gamma * np.asarray(ambiguous, dtype=np.float64))


@dataclass(frozen=True)
class SelectorSample:
    """Column view of selector training rows: phi, error E, flag a and y_cost."""

    phi: np.ndarray
    error: np.ndarray
    ambiguous: np.ndarray
    y_cost: np.ndarray

    def __len__(self) -> int:
        return len(self.phi)

    def subset(self, index: np.ndarray) -> "SelectorSample":
        return SelectorSample(self.phi[index], self.error[index], self.ambiguous[index], self.y_cost[index])


def make_samples(
    summary: EnsembleSummary,
    labels: np.ndarray,
    ambiguous: np.ndarray,
    gamma: float,
    include_aux: bool = True,
) -> SelectorSample:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != summary.prediction.shape:
        raise InvalidShapeError(f"{labels.shape[0]} labels for {len(summary)} summaries.")
    error = (summary.prediction != labels).astype(np.float64)
    flag = np.asarray(ambiguous, dtype=np.float64)
    return SelectorSample(
        phi=build_features(summary, include_aux),
        error=error,
        ambiguous=flag,
        y_cost=accept_cost(error, flag, gamma),
    )


# -----------------------------------------------------------------------------
# Pairwise ranking
# -----------------------------------------------------------------------------


def ordered_pairs(
    targets: np.ndarray, pair_cap: int, rng: np.random.Generator | None
) -> Tuple[np.ndarray, np.ndarray]:
    """Index arrays (i, j) of pairs with z_i > z_j, subsampled uniformly to ``pair_cap``."""

    z = np.asarray(targets, dtype=np.float64)
    first, second = np.nonzero(z[:, None] > z[None, :])
    if len(first) > pair_cap and rng is not None:
        keep = np.sort(rng.choice(len(first), size=pair_cap, replace=False))
        first, second = first[keep], second[keep]
    return first, second


def rank_loss_and_grad(
    scores: np.ndarray,
    targets: np.ndarray,
    margin: float,
    pair_cap: int,
    rng: np.random.Generator | None = None,
) -> Tuple[float, np.ndarray]:
    r = np.asarray(scores, dtype=np.float64)
    z = np.asarray(targets, dtype=np.float64)
    grad = np.zeros_like(r)
    first, second = ordered_pairs(z, pair_cap, rng)
    if len(first) == 0:
        return 0.0, grad
    weight = z[first] - z[second]
    slack = margin - (r[first] - r[second])
    loss = float(np.mean(weight * softplus(slack)))
    d_slack = weight * sigmoid(slack) / len(first)
    np.add.at(grad, first, -d_slack)
    np.add.at(grad, second, d_slack)
    return loss, grad


def rank_loss(
    scores: np.ndarray,
    targets: np.ndarray,
    margin: float = 1.0,
    pair_cap: int = 512,
    rng: np.random.Generator | None = None,
) -> float:
    """Mean of (z_i - z_j) * softplus(m - (r_i - r_j)) over ordered pairs; 0 without pairs."""

    return rank_loss_and_grad(scores, targets, margin, pair_cap, rng)[0]


def selector_loss_and_grad(
    scores: np.ndarray,
    error: np.ndarray,
    y_cost: np.ndarray,
    config: SelectorConfig,
    rng: np.random.Generator | None = None,
) -> Tuple[float, np.ndarray]:
    r = np.asarray(scores, dtype=np.float64)
    bce, d_bce = binary_cross_entropy_with_logits(r, np.asarray(y_cost, dtype=np.float64))
    loss = float(bce.mean())
    grad = d_bce / len(r)
    if config.w > 0:
        term, d_term = rank_loss_and_grad(r, error, config.rank_margin, config.pair_cap, rng)
        loss += config.w * term
        grad += config.w * d_term
    if config.c > 0:
        term, d_term = rank_loss_and_grad(r, y_cost, config.rank_margin, config.pair_cap, rng)
        loss += config.c * term
        grad += config.c * d_term
    return loss, grad


def selector_loss(
    scores: np.ndarray,
    error: np.ndarray,
    y_cost: np.ndarray,
    config: SelectorConfig,
    rng: np.random.Generator | None = None,
) -> float:
    """BCE(sigmoid(r), y_cost) + w * rank(r, E) + c * rank(r, y_cost)."""

    return selector_loss_and_grad(scores, error, y_cost, config, rng)[0]


# -----------------------------------------------------------------------------
# Network
# -----------------------------------------------------------------------------


class CostAwareSelector:
    """Small tanh MLP over standardized phi, ``depth`` affine layers ending in one logit.

    Inputs pass through arcsinh before the z-score so that heavy-tailed columns
    such as the hypothesis gap keep their spread in the bulk.
    """

    def __init__(
        self,
        config: SelectorConfig,
        params: ParamSet,
        feature_mean: np.ndarray,
        feature_std: np.ndarray,
        seed: int,
    ):
        self.config = config
        self.params = params
        self.feature_mean = feature_mean
        self.feature_std = feature_std
        self.seed = seed
        self._rank_rng = rngs.stream(seed, "ranking", "selector")

    @classmethod
    def initialize(
        cls, config: SelectorConfig, phi: np.ndarray, seed: int | None = None
    ) -> "CostAwareSelector":
        seed = config.seed if seed is None else seed
        phi = np.asarray(phi, dtype=np.float64)
        if phi.ndim != 2 or phi.shape[1] != N_SELECTOR_FEATURES:
            raise InvalidShapeError(f"phi must have shape (N, {N_SELECTOR_FEATURES}), got {phi.shape}.")
        rng = rngs.stream(seed, "init", "selector")
        params = ParamSet()
        widths = [N_SELECTOR_FEATURES] + [config.width] * (config.depth - 1) + [1]
        for layer, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            init_affine(params, f"sel{layer}", fan_in, fan_out, rng)
        compressed = np.arcsinh(phi)
        mean = compressed.mean(axis=0)
        std = np.maximum(compressed.std(axis=0), _STD_FLOOR)
        return cls(config, params, mean, std, seed)

    def standardize(self, phi: np.ndarray) -> np.ndarray:
        return (np.arcsinh(np.asarray(phi, dtype=np.float64)) - self.feature_mean) / self.feature_std

    def _forward(
        self, inputs: np.ndarray, rng: np.random.Generator | None
    ) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]]]:
        cache = []
        x = inputs
        last = self.config.depth - 1
        for layer in range(self.config.depth):
            out = affine_forward(x, self.params, f"sel{layer}")
            if layer == last:
                cache.append((x, out, None))
                return out[:, 0], cache
            hidden = np.tanh(out)
            mask = dropout_mask(hidden.shape, self.config.dropout, rng)
            cache.append((x, hidden, mask))
            x = apply_mask(hidden, mask)
        raise AssertionError("unreachable")

    def raw_scores(self, phi: np.ndarray) -> np.ndarray:
        return self._forward(self.standardize(phi), None)[0]

    def loss_and_grad(
        self,
        batch: Arrays,
        rng: np.random.Generator | None = None,
        rank_rng: np.random.Generator | None = None,
    ) -> float:
        """``rank_rng`` picks the ranking pairs once a batch exceeds ``pair_cap``; defaults to the training stream."""

        inputs, error, y_cost = batch
        self.params.zero_grad()
        scores, cache = self._forward(inputs, rng)
        pairs_rng = self._rank_rng if rank_rng is None else rank_rng
        loss, d_scores = selector_loss_and_grad(scores, error, y_cost, self.config, pairs_rng)
        d_x = d_scores[:, None]
        for layer in range(self.config.depth - 1, -1, -1):
            x, activation, mask = cache[layer]
            if layer < self.config.depth - 1:
                d_x = apply_mask(d_x, mask) * (1.0 - activation**2)
            d_x = affine_backward(d_x, x, self.params, f"sel{layer}")
        return loss

    def evaluate_loss(self, arrays: Arrays) -> float:
        inputs, error, y_cost = arrays
        scores, _ = self._forward(inputs, None)
        fixed = rngs.stream(self.seed, "ranking", "selector-holdout")
        return selector_loss(scores, error, y_cost, self.config, fixed)


@dataclass
class CrossFitSelector:
    """Selectors trained on complementary slices of one calibration split.

    Every calibration sample is held out by exactly one member; that member's raw
    score is kept in ``holdout_scores`` so thresholds never see in-sample scores.
    New sequences get the mean raw score of all members.
    """

    members: List[CostAwareSelector]
    holdout_scores: np.ndarray
    logs: List[TrainingLog] = field(default_factory=list)

    @property
    def config(self) -> SelectorConfig:
        return self.members[0].config

    def raw_scores(self, phi: np.ndarray) -> np.ndarray:
        return np.mean([member.raw_scores(phi) for member in self.members], axis=0)

    def calibration_scores(self) -> np.ndarray:
        return expit(-self.holdout_scores)


def _check_samples(samples: SelectorSample, minimum: int) -> None:
    if len(samples) < minimum:
        raise ConfigError(f"Selector needs at least {minimum} samples, got {len(samples)}.")
    if np.all(samples.y_cost == samples.y_cost[0]):
        raise ConfigError(
            f"Degenerate selector split: every accept cost equals {samples.y_cost[0]:.2f}."
        )


def _split_strata(samples: SelectorSample, parts: int) -> Optional[np.ndarray]:
    """Class codes of y_cost, else of the ambiguity flag, when every class can reach every part."""

    for column in (samples.y_cost, samples.ambiguous):
        values, codes, counts = np.unique(column, return_inverse=True, return_counts=True)
        if len(values) > 1 and counts.min() >= parts:
            return codes
    return None


def _fit_member(
    samples: SelectorSample, fit_index: np.ndarray, hold_index: np.ndarray, config: SelectorConfig, seed: int
) -> Tuple[CostAwareSelector, TrainingLog]:
    fit_part, hold_part = samples.subset(np.sort(fit_index)), samples.subset(np.sort(hold_index))
    if np.all(fit_part.y_cost == fit_part.y_cost[0]):
        raise ConfigError("Degenerate selector split: the training slice holds a single accept cost.")

    selector = CostAwareSelector.initialize(config, fit_part.phi, seed)
    schedule = Schedule(
        role="selector",
        seed=seed,
        epochs=config.epochs,
        batch_size=config.batch_size,
        patience=config.patience,
        lr=config.lr,
    )
    log = fit(
        selector,
        (selector.standardize(fit_part.phi), fit_part.error, fit_part.y_cost),
        (selector.standardize(hold_part.phi), hold_part.error, hold_part.y_cost),
        schedule,
    )
    return selector, log


def train_selector(
    samples: SelectorSample, config: SelectorConfig, seed: int | None = None
) -> Tuple[CostAwareSelector, TrainingLog]:
    """Fit on a calibration split; a held-out slice of it drives early stopping."""

    seed = config.seed if seed is None else seed
    _check_samples(samples, 4)
    fit_index, hold_index = train_test_split(
        np.arange(len(samples)),
        test_size=config.holdout_fraction,
        random_state=rngs.derive_seed(seed, "sampling", "selector-holdout"),
        stratify=_split_strata(samples, 2),
    )
    return _fit_member(samples, fit_index, hold_index, config, seed)


def train_crossfit_selector(
    samples: SelectorSample, config: SelectorConfig, seed: int | None = None
) -> CrossFitSelector:
    """``config.crossfit_folds`` members, each early-stopped on the slice it does not train on."""

    seed = config.seed if seed is None else seed
    parts = config.crossfit_folds
    _check_samples(samples, 2 * parts)
    strata = _split_strata(samples, parts)
    random_state = rngs.derive_seed(seed, "folds", "selector")
    if strata is None:
        splitter = KFold(n_splits=parts, shuffle=True, random_state=random_state)
    else:
        splitter = StratifiedKFold(n_splits=parts, shuffle=True, random_state=random_state)

    index = np.arange(len(samples))
    holdout_scores = np.empty(len(samples))
    members, logs = [], []
    for part, (fit_index, hold_index) in enumerate(splitter.split(index, strata)):
        member_seed = rngs.derive_seed(seed, "init", "selector", part)
        member, log = _fit_member(samples, fit_index, hold_index, config, member_seed)
        holdout_scores[hold_index] = member.raw_scores(samples.phi[hold_index])
        members.append(member)
        logs.append(log)
    _LOGGER.debug(
        "cross-fit selector: %d members, best epochs %s", len(members), [log.best_epoch + 1 for log in logs]
    )
    return CrossFitSelector(members, holdout_scores, logs)


def accept_scores(selector: CostAwareSelector | CrossFitSelector, phi: np.ndarray) -> np.ndarray:
    """s = 1 - sigmoid(r), computed as sigmoid(-r)."""

    return expit(-selector.raw_scores(phi))


def calibrate_threshold(scores: np.ndarray, coverage: float) -> float:
    """Largest tau with at least ``coverage`` of ``scores`` >= tau."""

    values = np.asarray(scores, dtype=np.float64).ravel()
    if values.size == 0:
        raise InvalidInputError("Cannot calibrate a threshold on zero scores.")
    if not 0.0 < coverage <= 1.0:
        raise ConfigError(f"Coverage must lie in (0, 1], got {coverage}.")
    keep = min(values.size, max(1, math.ceil(coverage * values.size - 1e-9)))
    return float(np.sort(values)[::-1][keep - 1])
