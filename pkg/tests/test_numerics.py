"""Layer math, losses, Adam and the finite-difference checker."""

import math

import numpy as np
import pytest

from chase.errors import InvalidShapeError, NumericalFailureError
from chase.numerics import (
    OptimizerState,
    ParamSet,
    adam_step,
    affine_backward,
    affine_forward,
    apply_mask,
    dropout_mask,
    gaussian_nll,
    gaussian_nll_backward,
    grad_check,
    gru_cell_backward,
    gru_cell_forward,
    gru_sequence_backward,
    gru_sequence_forward,
    init_affine,
    init_gru,
    softmax,
)


def _zero_gru(input_size: int = 6, hidden: int = 4) -> ParamSet:
    params = ParamSet()
    params.add("gru.Wx", np.zeros((input_size, 3 * hidden)))
    params.add("gru.Uzr", np.zeros((hidden, 2 * hidden)))
    params.add("gru.Uh", np.zeros((hidden, hidden)))
    params.add("gru.b", np.zeros(3 * hidden))
    return params


def test_gru_with_zero_weights_halves_the_previous_state() -> None:
    params = _zero_gru()
    x = np.random.default_rng(0).normal(size=6)

    h, _ = gru_cell_forward(x, np.zeros(4), params)
    assert np.array_equal(h, np.zeros(4))

    previous = np.array([1.0, -2.0, 0.5, 4.0])
    h, _ = gru_cell_forward(x, previous, params)
    np.testing.assert_allclose(h, 0.5 * previous, rtol=0, atol=1e-15)


def test_gru_rejects_mismatched_input_width() -> None:
    with pytest.raises(InvalidShapeError):
        gru_cell_forward(np.zeros(5), np.zeros(4), _zero_gru())


def test_gru_sequence_gradients_match_finite_differences() -> None:
    rng = np.random.default_rng(3)
    params = ParamSet()
    init_gru(params, "gru", 3, 5, rng)
    params.set("gru.b", rng.normal(scale=0.1, size=15))
    inputs = rng.normal(size=(2, 4, 3))
    weights = rng.normal(size=(2, 4, 5))

    def loss_fn(p: ParamSet) -> float:
        p.zero_grad()
        states, caches = gru_sequence_forward(inputs, p)
        gru_sequence_backward(weights, caches, p)
        return float(np.sum(states * weights))

    report = grad_check(loss_fn, params)
    assert report.passed, report.worst


def test_sequence_backward_equals_stepwise_cell_backward() -> None:
    rng = np.random.default_rng(8)
    params = ParamSet()
    init_gru(params, "gru", 4, 6, rng)
    params.set("gru.b", rng.normal(scale=0.1, size=18))
    inputs = rng.normal(size=(3, 7, 4))
    d_states = rng.normal(size=(3, 7, 6))
    states, caches = gru_sequence_forward(inputs, params)

    params.zero_grad()
    gru_sequence_backward(d_states, caches, params)
    batched = {name: params.grad(name).copy() for name in params.names()}

    params.zero_grad()
    dh_next = np.zeros((3, 6))
    for t in range(6, -1, -1):
        _, dh_next = gru_cell_backward(d_states[:, t, :] + dh_next, caches[t], params)
    for name in params.names():
        np.testing.assert_allclose(batched[name], params.grad(name), rtol=1e-10, atol=1e-12)

    h = np.zeros((3, 6))
    for t in range(7):
        h, _ = gru_cell_forward(inputs[:, t, :], h, params)
        np.testing.assert_allclose(states[:, t, :], h, rtol=1e-10, atol=1e-12)


def test_gaussian_nll_closed_form_values() -> None:
    x = np.array([0.3, -1.2, 2.0])
    assert float(gaussian_nll(x, x, np.zeros(3))) == pytest.approx(0.918939, abs=1e-6)
    assert float(gaussian_nll(x, x - 1.0, np.zeros(3))) == pytest.approx(1.418939, abs=1e-6)


def test_gaussian_nll_clamps_logvar() -> None:
    x, mu = np.zeros(2), np.ones(2)
    assert float(gaussian_nll(x, mu, np.full(2, 50.0))) == pytest.approx(float(gaussian_nll(x, mu, np.full(2, 8.0))))
    with pytest.raises(InvalidShapeError):
        gaussian_nll(np.zeros(2), np.zeros(3), np.zeros(2))


def test_gaussian_nll_gradients_match_finite_differences() -> None:
    rng = np.random.default_rng(11)
    x = rng.normal(size=(3, 4))
    params = ParamSet()
    params.add("mu", rng.normal(size=(3, 4)))
    params.add("logvar", rng.normal(scale=0.5, size=(3, 4)))

    def loss_fn(p: ParamSet) -> float:
        p.zero_grad()
        values = gaussian_nll(x, p["mu"], p["logvar"])
        d_mu, d_logvar = gaussian_nll_backward(np.ones(3), x, p["mu"], p["logvar"])
        p.accumulate("mu", d_mu)
        p.accumulate("logvar", d_logvar)
        return float(values.sum())

    assert grad_check(loss_fn, params).passed


def test_affine_tanh_gradients_match_finite_differences() -> None:
    rng = np.random.default_rng(5)
    params = ParamSet()
    init_affine(params, "layer", 4, 3, rng)
    x = rng.normal(size=(6, 4))
    weights = rng.normal(size=(6, 3))

    def loss_fn(p: ParamSet) -> float:
        p.zero_grad()
        out = np.tanh(affine_forward(x, p, "layer"))
        affine_backward(weights * (1.0 - out**2), x, p, "layer")
        return float(np.sum(out * weights))

    assert grad_check(loss_fn, params).passed


def test_grad_check_linear_loss_is_exact() -> None:
    c = np.array([0.5, -2.0, 3.0])
    params = ParamSet()
    params.add("w", np.array([1.0, 2.0, -1.0]))

    def loss_fn(p: ParamSet) -> float:
        p.zero_grad()
        p.accumulate("w", c.copy())
        return float(p["w"] @ c)

    report = grad_check(loss_fn, params)
    assert report.max_rel_error < 1e-9
    assert report.checked == 3


def test_grad_check_flags_non_finite_loss() -> None:
    params = ParamSet()
    params.add("w", np.ones(2))
    with pytest.raises(NumericalFailureError):
        grad_check(lambda p: math.nan, params)


def test_adam_zero_gradient_leaves_parameters_unchanged() -> None:
    params = ParamSet()
    params.add("w", np.array([1.0, -1.0]))
    state = OptimizerState.for_params(params)
    adam_step(params, state)
    assert np.array_equal(params["w"], [1.0, -1.0])
    assert state.step == 1


def test_adam_first_step_moves_each_coordinate_by_lr() -> None:
    params = ParamSet()
    params.add("w", np.zeros(3))
    params.accumulate("w", np.array([0.3, -7.0, 2.0]))
    adam_step(params, OptimizerState.for_params(params, lr=0.001))
    np.testing.assert_allclose(params["w"], [-0.001, 0.001, -0.001], rtol=1e-6)
    assert np.array_equal(params.grad("w"), np.zeros(3))


def test_adam_converges_on_a_quadratic_bowl() -> None:
    params = ParamSet()
    params.add("w", np.ones(3))
    state = OptimizerState.for_params(params, lr=1e-3)
    for _ in range(5000):
        params.accumulate("w", 2.0 * params["w"])
        adam_step(params, state)
        if np.linalg.norm(params["w"]) < 1e-3:
            break
    assert np.linalg.norm(params["w"]) < 1e-3
    assert state.step <= 5000


def test_softmax_rows_are_distributions() -> None:
    logits = np.random.default_rng(2).normal(scale=30.0, size=(50, 2))
    probs = softmax(logits)
    assert np.all(probs >= 0.0)
    np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-12)


def test_dropout_mask_is_seeded_and_inverted() -> None:
    first = dropout_mask((200, 8), 0.25, np.random.default_rng(9))
    second = dropout_mask((200, 8), 0.25, np.random.default_rng(9))
    assert np.array_equal(first, second)
    assert set(np.unique(first)) <= {0.0, 1.0 / 0.75}
    assert dropout_mask((3,), 0.0, np.random.default_rng(0)) is None
    x = np.ones(3)
    assert apply_mask(x, None) is x
