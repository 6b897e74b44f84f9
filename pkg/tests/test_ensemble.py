"""Seed averaging, dispersion signals and fusion tuning."""

import numpy as np
import pytest
from pydantic import ValidationError

from chase.config import BackboneConfig
from chase.errors import ConfigError
from chase.labels import CONNECTED, NOT_CONNECTED
from chase.models import (
    BackboneOutput,
    FusionWeight,
    collect_outputs,
    committed_class,
    ensemble_forward,
    summarize,
    train_ensemble,
    tune_fusion,
    tune_fusion_from_outputs,
)
from chase.models.ensemble import fusion_grid


def _output(p_hyp_connected, p_aux_connected) -> BackboneOutput:
    p_hyp = np.asarray(p_hyp_connected, dtype=np.float64)
    p_aux = np.asarray(p_aux_connected, dtype=np.float64)
    # scores whose softmax(-scores) reproduces p_hyp
    scores = np.column_stack([-np.log(p_hyp), -np.log(1.0 - p_hyp)])
    return BackboneOutput.from_scores(scores, np.column_stack([p_aux, 1.0 - p_aux]))


def test_single_member_has_no_dispersion() -> None:
    summary = summarize([_output([0.9, 0.2, 0.6], [0.7, 0.4, 0.5])])

    assert summary.members == 1
    np.testing.assert_array_equal(summary.sigma_hyp, 0.0)
    np.testing.assert_array_equal(summary.sigma_aux, 0.0)
    np.testing.assert_array_equal(summary.delta, 0.0)
    np.testing.assert_array_equal(summary.prediction, [CONNECTED, NOT_CONNECTED, CONNECTED])


def test_identical_members_match_a_single_member() -> None:
    member = _output([0.8, 0.3], [0.6, 0.1])
    many = summarize([member] * 3, alpha_f=0.5)
    one = summarize([member], alpha_f=0.5)

    np.testing.assert_allclose(many.pi_fused, one.pi_fused)
    np.testing.assert_allclose(many.sigma_hyp, 0.0, atol=1e-15)
    np.testing.assert_array_equal(many.delta, 0.0)


def test_one_dissenting_seed_gives_a_third() -> None:
    outputs = [_output([0.9], [0.9]), _output([0.8], [0.8]), _output([0.2], [0.2])]
    summary = summarize(outputs)

    assert summary.prediction[0] == CONNECTED
    assert summary.delta[0] == pytest.approx(1.0 / 3.0)
    assert summary.sigma_hyp[0] == pytest.approx(np.std([0.9, 0.8, 0.2]))


def test_summary_is_invariant_to_seed_order() -> None:
    outputs = [_output([0.9, 0.45], [0.3, 0.6]), _output([0.4, 0.7], [0.5, 0.2]), _output([0.6, 0.5], [0.8, 0.9])]
    forward = summarize(outputs, alpha_f=0.35)
    backward = summarize(outputs[::-1], alpha_f=0.35)

    np.testing.assert_array_equal(forward.prediction, backward.prediction)
    np.testing.assert_allclose(forward.pi_fused, backward.pi_fused)
    np.testing.assert_allclose(forward.delta, backward.delta)


def test_fused_probability_is_a_convex_combination() -> None:
    rng = np.random.default_rng(0)
    outputs = [_output(rng.uniform(0.05, 0.95, 40), rng.uniform(0.05, 0.95, 40)) for _ in range(3)]
    for alpha in fusion_grid(21):
        summary = summarize(outputs, alpha_f=alpha)
        low = np.minimum(summary.pi_hyp, summary.pi_aux) - 1e-12
        high = np.maximum(summary.pi_hyp, summary.pi_aux) + 1e-12
        assert np.all((summary.pi_fused >= low) & (summary.pi_fused <= high))

    at_zero = summarize(outputs, alpha_f=0.0)
    np.testing.assert_array_equal(at_zero.pi_fused, at_zero.pi_aux)


def test_empty_ensemble_is_a_config_error() -> None:
    with pytest.raises(ConfigError):
        summarize([])
    with pytest.raises(ConfigError):
        tune_fusion_from_outputs([], np.array([0]))


def test_exact_ties_follow_the_tie_break() -> None:
    probs = np.array([[0.5, 0.5], [0.7, 0.3], [0.2, 0.8]])
    np.testing.assert_array_equal(committed_class(probs), [CONNECTED, CONNECTED, NOT_CONNECTED])
    np.testing.assert_array_equal(committed_class(probs, NOT_CONNECTED), [NOT_CONNECTED, CONNECTED, NOT_CONNECTED])


def test_fusion_prefers_a_perfect_hypothesis_softmax() -> None:
    rng = np.random.default_rng(4)
    labels = rng.integers(0, 2, size=200)
    p_hyp = np.where(labels == CONNECTED, 0.8, 0.2)
    weight = tune_fusion_from_outputs([_output(p_hyp, rng.uniform(0.01, 0.99, 200))], labels)

    assert weight.alpha_f == 1.0
    assert weight.val_accuracy == 1.0


def test_fusion_ties_resolve_to_the_largest_weight() -> None:
    p = np.array([0.9, 0.3, 0.6, 0.2])
    weight = tune_fusion_from_outputs([_output(p, p)], np.array([0, 0, 1, 1]))
    assert weight.alpha_f == 1.0
    assert weight.val_accuracy == 0.5


def test_fusion_can_move_toward_the_auxiliary_head() -> None:
    labels = np.array([0, 0, 1, 1])
    p_hyp = np.array([0.45, 0.45, 0.55, 0.55])
    p_aux = np.array([0.95, 0.95, 0.05, 0.05])
    weight = tune_fusion_from_outputs([_output(p_hyp, p_aux)], labels)

    assert weight.alpha_f < 1.0
    assert weight.val_accuracy == 1.0


def test_fusion_weight_must_sit_on_the_grid() -> None:
    assert FusionWeight(alpha_f=0.35).alpha_f == 0.35
    with pytest.raises(ValidationError):
        FusionWeight(alpha_f=0.33)


def test_trained_ensemble_matches_serial_training() -> None:
    rng = np.random.default_rng(9)
    labels = rng.integers(0, 2, size=20)
    x = rng.normal(scale=0.3, size=(20, 5, 6))
    x[labels == CONNECTED, :, 4] += 1.0
    config = BackboneConfig(hidden_size=6, aux_hidden=4, epochs=2, batch_size=10)

    parallel = train_ensemble((x[:14], labels[:14]), (x[14:], labels[14:]), config, seeds=(42, 143), workers=2)
    serial = train_ensemble((x[:14], labels[:14]), (x[14:], labels[14:]), config, seeds=(42, 143))
    models = [model for model, _ in parallel]
    for (first, _), (second, _) in zip(parallel, serial):
        for name in first.params:
            np.testing.assert_array_equal(first.params[name], second.params[name])

    summary = ensemble_forward(x, models, alpha_f=0.5)
    np.testing.assert_array_equal(summary.pi_fused, summarize(collect_outputs(x, models), alpha_f=0.5).pi_fused)
    assert summary.members == 2
    assert tune_fusion(x, labels, models) == tune_fusion_from_outputs(collect_outputs(x, models), labels)
    with pytest.raises(ConfigError):
        train_ensemble((x, labels), (x, labels), config, seeds=())
