"""Dual-hypothesis backbone: loss arithmetic, forward invariants, gradients and training."""

import math

import numpy as np
import pytest

from chase.config import BackboneConfig, SimConfig
from chase.errors import InvalidInputError, InvalidShapeError
from chase.labels import CONNECTED, NOT_CONNECTED
from chase.models import BackboneOutput, DualHypothesisBackbone, backbone_forward, backbone_loss, train_backbone
from chase.numerics import grad_check

SMALL = BackboneConfig(hidden_size=8, aux_hidden=4)


def _aux_with_ce(ce: float, label: int) -> np.ndarray:
    p = math.exp(-ce)
    row = [p, 1.0 - p] if label == CONNECTED else [1.0 - p, p]
    return np.array([row])


def test_loss_with_inactive_hinge() -> None:
    output = BackboneOutput.from_scores(np.array([[1.0, 3.0]]), _aux_with_ce(0.2, CONNECTED))
    assert backbone_loss(output, CONNECTED, BackboneConfig()) == pytest.approx(1.3)

    mirrored = BackboneOutput.from_scores(np.array([[3.0, 1.0]]), _aux_with_ce(0.2, NOT_CONNECTED))
    assert backbone_loss(mirrored, NOT_CONNECTED, BackboneConfig()) == pytest.approx(1.3)


def test_loss_with_active_hinge() -> None:
    output = BackboneOutput.from_scores(np.array([[1.0, 1.3]]), _aux_with_ce(0.2, CONNECTED))
    assert backbone_loss(output, CONNECTED, BackboneConfig()) == pytest.approx(1.0 + 0.7 + 1.5 * 0.2)

    # gap exactly at the margin leaves the hinge at zero
    at_margin = BackboneOutput.from_scores(np.array([[1.0, 2.0]]), _aux_with_ce(0.2, CONNECTED))
    assert backbone_loss(at_margin, CONNECTED, BackboneConfig()) == pytest.approx(1.3)


def test_loss_rejects_label_count_mismatch() -> None:
    output = BackboneOutput.from_scores(np.zeros((2, 2)), np.full((2, 2), 0.5))
    with pytest.raises(InvalidShapeError):
        backbone_loss(output, np.array([0, 1, 0]), BackboneConfig())


def test_identical_heads_tie_the_hypotheses() -> None:
    model = DualHypothesisBackbone.initialize(SMALL, seed=1)
    for suffix in ("W", "b"):
        model.params.set(f"head_n.{suffix}", model.params[f"head_c.{suffix}"])
    x = np.random.default_rng(0).normal(size=(5, 7, 6))

    output = backbone_forward(x, model)
    np.testing.assert_array_equal(output.ell_c, output.ell_n)
    np.testing.assert_allclose(output.pi_hyp, 0.5)


def test_forward_invariants() -> None:
    model = DualHypothesisBackbone.initialize(SMALL, seed=2)
    x = np.random.default_rng(1).normal(size=(20, 9, 6))
    output = model.forward(x)

    np.testing.assert_allclose(output.pi_hyp.sum(axis=-1), 1.0, atol=1e-12)
    np.testing.assert_allclose(output.pi_aux.sum(axis=-1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(np.argmax(output.pi_hyp, axis=-1), np.argmin(output.scores, axis=-1))
    np.testing.assert_allclose(output.gap, output.ell_n - output.ell_c)

    single = model.forward(x[3])
    np.testing.assert_allclose(single.scores, output.scores[3:4])


def test_forward_needs_two_frames() -> None:
    model = DualHypothesisBackbone.initialize(SMALL, seed=0)
    with pytest.raises(InvalidInputError):
        model.forward(np.zeros((2, 1, 6)))
    with pytest.raises(InvalidShapeError):
        model.forward(np.zeros((2, 5, 4)))


def test_single_hypothesis_scores_both_classes_with_one_head() -> None:
    config = SMALL.model_copy(update={"hypotheses": "connected"})
    model = DualHypothesisBackbone.initialize(config, seed=3)
    output = model.forward(np.random.default_rng(2).normal(size=(6, 5, 6)))

    assert model.heads == ("head_c",)
    assert "head_n.W" not in model.params
    np.testing.assert_array_equal(output.ell_c, output.ell_n)
    np.testing.assert_array_equal(output.pi_hyp, 0.5)


@pytest.mark.parametrize("hypotheses", ["dual", "not_connected"])
def test_loss_gradients_match_finite_differences(hypotheses: str) -> None:
    config = SMALL.model_copy(update={"hypotheses": hypotheses})
    rng = np.random.default_rng(17)
    batches = 10 if hypotheses == "dual" else 2
    for batch in range(batches):
        model = DualHypothesisBackbone.initialize(config, seed=batch)
        x = rng.normal(size=(4, 6, 6))
        y = rng.integers(0, 2, size=4)

        report = grad_check(lambda _: model.loss_and_grad((x, y)), model.params, max_coords=200, seed=batch)
        assert report.max_rel_error < 1e-4, (batch, report.worst)


def _toy_sequences(n: int, frames: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n)
    x = rng.normal(scale=0.3, size=(n, frames, 6))
    x[labels == CONNECTED, :, 4] += 1.0
    return x, labels


def test_training_is_deterministic_for_a_seed() -> None:
    train = _toy_sequences(24, 5, seed=0)
    validation = _toy_sequences(8, 5, seed=1)
    config = SMALL.model_copy(update={"epochs": 2, "batch_size": 8})

    first, log = train_backbone(train, validation, config, seed=42)
    second, _ = train_backbone(train, validation, config, seed=42)

    assert log.epochs_run == 2
    assert len(log.val_losses) == 2
    for name in first.params:
        np.testing.assert_array_equal(first.params[name], second.params[name])


@pytest.mark.slow
def test_trained_backbone_separates_clean_sequences() -> None:
    from chase.harness import Normalizer
    from chase.simulator import SequenceTable, generate_dataset

    records, _ = generate_dataset(SimConfig(n_sequences=960, seed=4))
    table = SequenceTable.from_records(records)
    clean = table.subset(np.flatnonzero(table.alpha < 0.25))
    order = np.random.default_rng(0).permutation(len(clean))
    fit_part, val_part, test_part = (clean.subset(order[a:b]) for a, b in ((0, 150), (150, 190), (190, None)))
    normalizer = Normalizer.fit(fit_part.features)

    model, _ = train_backbone(
        (normalizer.transform(fit_part.features), fit_part.labels),
        (normalizer.transform(val_part.features), val_part.labels),
        BackboneConfig(hidden_size=32, epochs=15),
    )
    output = model.forward(normalizer.transform(test_part.features))
    accuracy = np.mean(np.argmax(output.pi_hyp, axis=-1) == test_part.labels)
    assert accuracy >= 0.95
