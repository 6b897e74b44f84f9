"""Forward/backward pairs for the layers the models are built from.

Forward helpers return ``(output, cache)``; backward helpers take the upstream
gradient plus the cache, accumulate parameter gradients into the ``ParamSet``
and return the gradient with respect to the layer input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.special import expit, softmax as _softmax

from ..errors import InvalidShapeError
from .params import ParamSet, uniform_init


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    return _softmax(logits, axis=axis)


def _as_rows(array: np.ndarray) -> np.ndarray:
    return array.reshape(-1, array.shape[-1])


# -----------------------------------------------------------------------------
# Affine
# -----------------------------------------------------------------------------


def init_affine(
    params: ParamSet, prefix: str, fan_in: int, fan_out: int, rng: np.random.Generator
) -> None:
    params.add(f"{prefix}.W", uniform_init(rng, (fan_in, fan_out), fan_in))
    params.add(f"{prefix}.b", np.zeros(fan_out))


def affine_forward(x: np.ndarray, params: ParamSet, prefix: str) -> np.ndarray:
    weight = params[f"{prefix}.W"]
    if x.shape[-1] != weight.shape[0]:
        raise InvalidShapeError(
            f"{prefix}: input width {x.shape[-1]} does not match weight rows {weight.shape[0]}."
        )
    return x @ weight + params[f"{prefix}.b"]


def affine_backward(dout: np.ndarray, x: np.ndarray, params: ParamSet, prefix: str) -> np.ndarray:
    weight = params[f"{prefix}.W"]
    params.accumulate(f"{prefix}.W", _as_rows(x).T @ _as_rows(dout))
    params.accumulate(f"{prefix}.b", _as_rows(dout).sum(axis=0))
    return dout @ weight.T


# -----------------------------------------------------------------------------
# Dropout
# -----------------------------------------------------------------------------


def dropout_mask(
    shape: tuple[int, ...], rate: float, rng: np.random.Generator | None
) -> np.ndarray | None:
    """Inverted-dropout mask, or ``None`` when dropout is inactive."""

    if rate <= 0.0 or rng is None:
        return None
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(np.float64) / keep


def apply_mask(x: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    return x if mask is None else x * mask


# -----------------------------------------------------------------------------
# GRU
# -----------------------------------------------------------------------------


@dataclass
class GRUCache:
    x: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    candidate: np.ndarray
    reset_hidden: np.ndarray


def init_gru(
    params: ParamSet, prefix: str, input_size: int, hidden_size: int, rng: np.random.Generator
) -> None:
    """Input weights for (z, r, h~) stacked column-wise; biases start at zero."""

    params.add(f"{prefix}.Wx", uniform_init(rng, (input_size, 3 * hidden_size), input_size))
    params.add(f"{prefix}.Uzr", uniform_init(rng, (hidden_size, 2 * hidden_size), hidden_size))
    params.add(f"{prefix}.Uh", uniform_init(rng, (hidden_size, hidden_size), hidden_size))
    params.add(f"{prefix}.b", np.zeros(3 * hidden_size))


def _check_gru_inputs(x_t: np.ndarray, h_prev: np.ndarray, params: ParamSet, prefix: str) -> None:
    w_x = params[f"{prefix}.Wx"]
    hidden = params[f"{prefix}.Uh"].shape[0]
    if x_t.shape[-1] != w_x.shape[0]:
        raise InvalidShapeError(
            f"{prefix}: input size {x_t.shape[-1]} does not match configured {w_x.shape[0]}."
        )
    if h_prev.shape[-1] != hidden:
        raise InvalidShapeError(
            f"{prefix}: hidden size {h_prev.shape[-1]} does not match configured {hidden}."
        )
    if x_t.shape[:-1] != h_prev.shape[:-1]:
        raise InvalidShapeError(
            f"{prefix}: batch shapes differ ({x_t.shape[:-1]} vs {h_prev.shape[:-1]})."
        )


def _gru_step(
    x_t: np.ndarray, pre_x: np.ndarray, h_prev: np.ndarray, u_zr: np.ndarray, u_h: np.ndarray
) -> tuple[np.ndarray, GRUCache]:
    hidden = u_h.shape[0]
    pre_zr = pre_x[..., : 2 * hidden] + h_prev @ u_zr
    z = sigmoid(pre_zr[..., :hidden])
    r = sigmoid(pre_zr[..., hidden:])
    reset_hidden = r * h_prev
    candidate = np.tanh(pre_x[..., 2 * hidden :] + reset_hidden @ u_h)
    h_t = (1.0 - z) * h_prev + z * candidate
    return h_t, GRUCache(x_t, h_prev, z, r, candidate, reset_hidden)


def gru_cell_forward(
    x_t: np.ndarray, h_prev: np.ndarray, params: ParamSet, prefix: str = "gru"
) -> tuple[np.ndarray, GRUCache]:
    """One step: h_t = (1 - z) * h_prev + z * h~."""

    _check_gru_inputs(x_t, h_prev, params, prefix)
    pre_x = x_t @ params[f"{prefix}.Wx"] + params[f"{prefix}.b"]
    return _gru_step(x_t, pre_x, h_prev, params[f"{prefix}.Uzr"], params[f"{prefix}.Uh"])


def _step_gradients(
    dh: np.ndarray, cache: GRUCache, u_zr: np.ndarray, u_h: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(d_pre_x, dh_prev) of one step; d_pre_x is laid out like the stacked (z, r, h~) columns."""

    z, r, candidate, h_prev = cache.z, cache.r, cache.candidate, cache.h_prev
    d_pre_h = dh * z * (1.0 - candidate**2)
    d_reset_hidden = d_pre_h @ u_h.T
    d_pre_zr = np.concatenate(
        [dh * (candidate - h_prev) * z * (1.0 - z), d_reset_hidden * h_prev * r * (1.0 - r)], axis=-1
    )
    dh_prev = dh * (1.0 - z) + d_reset_hidden * r + d_pre_zr @ u_zr.T
    return np.concatenate([d_pre_zr, d_pre_h], axis=-1), dh_prev


def gru_cell_backward(
    dh: np.ndarray, cache: GRUCache, params: ParamSet, prefix: str = "gru"
) -> tuple[np.ndarray, np.ndarray]:
    """Return (dx_t, dh_prev) and accumulate parameter gradients."""

    u_zr = params[f"{prefix}.Uzr"]
    u_h = params[f"{prefix}.Uh"]
    hidden = u_h.shape[0]
    d_pre_x, dh_prev = _step_gradients(dh, cache, u_zr, u_h)

    params.accumulate(f"{prefix}.Uh", _as_rows(cache.reset_hidden).T @ _as_rows(d_pre_x[..., 2 * hidden :]))
    params.accumulate(f"{prefix}.Uzr", _as_rows(cache.h_prev).T @ _as_rows(d_pre_x[..., : 2 * hidden]))
    params.accumulate(f"{prefix}.Wx", _as_rows(cache.x).T @ _as_rows(d_pre_x))
    params.accumulate(f"{prefix}.b", _as_rows(d_pre_x).sum(axis=0))
    return d_pre_x @ params[f"{prefix}.Wx"].T, dh_prev


def gru_sequence_forward(
    inputs: np.ndarray, params: ParamSet, prefix: str = "gru"
) -> tuple[np.ndarray, List[GRUCache]]:
    """Run the cell over ``inputs`` of shape (B, S, D) from h_0 = 0; returns (B, S, H).

    The input projection of every step is one matmul up front; only the recurrent
    part runs step by step.
    """

    if inputs.ndim != 3:
        raise InvalidShapeError(f"{prefix}: expected (batch, steps, features), got {inputs.shape}.")
    batch, steps, _ = inputs.shape
    u_zr = params[f"{prefix}.Uzr"]
    u_h = params[f"{prefix}.Uh"]
    hidden = u_h.shape[0]
    h = np.zeros((batch, hidden))
    _check_gru_inputs(inputs[:, 0, :], h, params, prefix)

    pre_x = inputs @ params[f"{prefix}.Wx"] + params[f"{prefix}.b"]
    states = np.empty((batch, steps, hidden))
    caches: List[GRUCache] = []
    for t in range(steps):
        h, cache = _gru_step(inputs[:, t, :], pre_x[:, t, :], h, u_zr, u_h)
        states[:, t, :] = h
        caches.append(cache)
    return states, caches


def gru_sequence_backward(
    d_states: np.ndarray, caches: List[GRUCache], params: ParamSet, prefix: str = "gru"
) -> None:
    """Backpropagation through time for gradients arriving at every hidden state.

    Step gradients are collected first and the weight gradients summed over
    all steps in one matmul per parameter.
    """

    u_zr = params[f"{prefix}.Uzr"]
    u_h = params[f"{prefix}.Uh"]
    hidden = u_h.shape[0]
    steps = len(caches)
    d_pre_x = np.empty(d_states.shape[:-1] + (3 * hidden,))
    dh_next = np.zeros_like(d_states[:, 0, :])
    for t in range(steps - 1, -1, -1):
        d_pre_x[:, t, :], dh_next = _step_gradients(d_states[:, t, :] + dh_next, caches[t], u_zr, u_h)

    x = np.stack([cache.x for cache in caches], axis=1)
    h_prev = np.stack([cache.h_prev for cache in caches], axis=1)
    reset_hidden = np.stack([cache.reset_hidden for cache in caches], axis=1)
    params.accumulate(f"{prefix}.Uh", _as_rows(reset_hidden).T @ _as_rows(d_pre_x[..., 2 * hidden :]))
    params.accumulate(f"{prefix}.Uzr", _as_rows(h_prev).T @ _as_rows(d_pre_x[..., : 2 * hidden]))
    params.accumulate(f"{prefix}.Wx", _as_rows(x).T @ _as_rows(d_pre_x))
    params.accumulate(f"{prefix}.b", _as_rows(d_pre_x).sum(axis=0))
