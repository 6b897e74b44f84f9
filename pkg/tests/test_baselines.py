"""MSP, MC Dropout and Deep Ensemble scoring on the single-branch classifier."""

import math

import numpy as np
import pytest

from chase.baselines import deep_ensemble_score, mc_dropout_passes, mc_dropout_score, msp_score
from chase.config import ClassifierConfig
from chase.errors import ConfigError
from chase.labels import CONNECTED
from chase.models import ClassifierModel, train_classifier

SMALL = ClassifierConfig(hidden_size=8, head_hidden=4)
FEATURES = np.random.default_rng(0).normal(size=(5, 7, 6))


def _constant(p_connected: float, config: ClassifierConfig = SMALL, seed: int = 0) -> ClassifierModel:
    """A classifier whose softmax is (p, 1 - p) whatever the input."""

    model = ClassifierModel.initialize(config, seed)
    model.params.set("head2.W", np.zeros_like(model.params["head2.W"]))
    model.params.set("head2.b", np.array([math.log(p_connected), math.log(1.0 - p_connected)]))
    return model


def test_msp_takes_the_larger_probability() -> None:
    prediction, score = msp_score(_constant(0.9), FEATURES)
    np.testing.assert_array_equal(prediction, CONNECTED)
    np.testing.assert_allclose(score, 0.9)

    _, even = msp_score(_constant(0.5), FEATURES)
    np.testing.assert_allclose(even, 0.5)


def test_deep_ensemble_averages_member_softmax() -> None:
    members = [_constant(p, seed=i) for i, p in enumerate((0.9, 0.7, 0.8))]
    prediction, score = deep_ensemble_score(members, FEATURES)
    np.testing.assert_array_equal(prediction, CONNECTED)
    np.testing.assert_allclose(score, 0.8)

    single = _constant(0.65)
    np.testing.assert_allclose(deep_ensemble_score([single] * 3, FEATURES)[1], msp_score(single, FEATURES)[1])
    with pytest.raises(ConfigError):
        deep_ensemble_score([], FEATURES)
    with pytest.raises(ConfigError):
        deep_ensemble_score([single], FEATURES)


def test_mc_dropout_without_dropout_is_msp() -> None:
    model = ClassifierModel.initialize(SMALL.model_copy(update={"dropout": 0.0}), seed=3)
    mc_prediction, mc_score = mc_dropout_score(model, FEATURES, passes=5)
    prediction, score = msp_score(model, FEATURES)

    np.testing.assert_array_equal(mc_prediction, prediction)
    np.testing.assert_allclose(mc_score, score, rtol=0, atol=1e-15)


def test_mc_dropout_passes_vary_and_repeat() -> None:
    model = ClassifierModel.initialize(SMALL.model_copy(update={"dropout": 0.5}), seed=4)
    first = mc_dropout_passes(model, FEATURES, passes=8)
    second = mc_dropout_passes(model, FEATURES, passes=8)

    assert first.shape == (8, 5, 2)
    np.testing.assert_array_equal(first, second)
    assert np.all(first[..., 0].var(axis=0) > 0.0)


def test_mc_dropout_needs_two_passes() -> None:
    with pytest.raises(ConfigError):
        mc_dropout_score(_constant(0.7), FEATURES, passes=1)


def test_classifier_training_lowers_validation_loss() -> None:
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 2, size=48)
    x = rng.normal(scale=0.3, size=(48, 6, 6))
    x[labels == CONNECTED, :, 4] += 1.5
    config = SMALL.model_copy(update={"epochs": 30, "batch_size": 16, "lr": 0.01, "patience": 30})

    model, log = train_classifier((x[:32], labels[:32]), (x[32:], labels[32:]), config, seed=42)

    assert log.best_val_loss == min(log.val_losses)
    assert log.best_val_loss < math.log(2.0)
    np.testing.assert_allclose(model.predict_proba(x).sum(axis=-1), 1.0, atol=1e-12)
