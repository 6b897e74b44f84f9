"""Scalar losses with closed-form gradients."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit, log_softmax

from ..errors import InvalidShapeError

LOGVAR_MIN = -8.0
LOGVAR_MAX = 8.0
_LOG_2PI = math.log(2.0 * math.pi)


def _check_same_shape(*arrays: np.ndarray) -> None:
    shapes = {array.shape for array in arrays}
    if len(shapes) != 1:
        raise InvalidShapeError(f"Shape mismatch: {sorted(shapes)}.")


def gaussian_nll(x: np.ndarray, mu: np.ndarray, logvar: np.ndarray) -> np.ndarray:
    """Mean over the last axis of 0.5 * (logvar + (x - mu)^2 * exp(-logvar) + log 2*pi).

    ``logvar`` is clamped to [-8, 8] first. One-dimensional inputs give a scalar.
    """

    x, mu, logvar = (np.asarray(a, dtype=np.float64) for a in (x, mu, logvar))
    _check_same_shape(x, mu, logvar)
    clamped = np.clip(logvar, LOGVAR_MIN, LOGVAR_MAX)
    terms = 0.5 * (clamped + (x - mu) ** 2 * np.exp(-clamped) + _LOG_2PI)
    return terms.mean(axis=-1)


def gaussian_nll_backward(
    dout: np.ndarray, x: np.ndarray, mu: np.ndarray, logvar: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients w.r.t. (mu, logvar); zero for logvar entries outside the clamp."""

    _check_same_shape(x, mu, logvar)
    clamped = np.clip(logvar, LOGVAR_MIN, LOGVAR_MAX)
    inside = (logvar >= LOGVAR_MIN) & (logvar <= LOGVAR_MAX)
    scale = np.asarray(dout, dtype=np.float64)[..., None] / x.shape[-1]
    precision = np.exp(-clamped)
    d_mu = -scale * (x - mu) * precision
    d_logvar = scale * 0.5 * (1.0 - (x - mu) ** 2 * precision) * inside
    return d_mu, d_logvar


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row CE and d(CE)/d(logits) for integer class targets."""

    log_probs = log_softmax(logits, axis=-1)
    rows = np.arange(logits.shape[0])
    losses = -log_probs[rows, targets]
    grad = np.exp(log_probs)
    grad[rows, targets] -= 1.0
    return losses, grad


def binary_cross_entropy_with_logits(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-element BCE(sigmoid(r), y) for soft targets y in [0, 1] and its gradient in r."""

    _check_same_shape(logits, targets)
    losses = np.logaddexp(0.0, logits) - targets * logits
    return losses, expit(logits) - targets
