"""Activity profiles, pair dynamics, features and dataset layout."""

from collections import defaultdict

import numpy as np
import pytest
from pydantic import ValidationError

from chase import rng as rngs
from chase.config import SimConfig
from chase.errors import ConfigError
from chase.labels import CONNECTED, INTERMITTENT, NOT_CONNECTED, SHORT_LOCAL
from chase.simulator import (
    ActivityProfile,
    SequenceRecord,
    SequenceTable,
    extract_features,
    generate_dataset,
    integrate_pair,
    read_dataset,
    sample_activity_profile,
    simulate_pair,
    write_dataset,
)
from chase.simulator.dataset import content_hash, plan_pairs, to_jsonl


def _always_on(frames: int = 64) -> ActivityProfile:
    return ActivityProfile(u=np.ones(frames), regime=SHORT_LOCAL, onsets=(0,), lengths=(frames,))


def test_short_local_profile_has_one_window() -> None:
    rng = np.random.default_rng(0)
    for _ in range(200):
        profile = sample_activity_profile(SHORT_LOCAL, rng)
        assert len(profile.onsets) == 1
        assert 8 <= profile.lengths[0] <= 16
        assert np.all(profile.u[profile.onsets[0] : profile.onsets[0] + profile.lengths[0]] == 1.0)


def test_intermittent_profile_windows_and_duty_cycle() -> None:
    rng = np.random.default_rng(1)
    for _ in range(1000):
        profile = sample_activity_profile(INTERMITTENT, rng)
        assert 2 <= len(profile.onsets) <= 4
        assert 0.3 <= profile.duty_cycle <= 0.6
        assert profile.u.min() >= 0.0 and profile.u.max() <= 1.0


def test_unknown_regime_is_rejected() -> None:
    with pytest.raises(ValueError):
        sample_activity_profile("continuous", np.random.default_rng(0))


def test_pair_without_forces_stays_put() -> None:
    config = SimConfig(spring_stiffness=0.0, drift_amplitude=0.0, brownian_sigma=0.0, obs_noise=0.0)
    trajectory = integrate_pair(CONNECTED, _always_on(), 0.0, config, np.random.default_rng(4))
    features = extract_features(trajectory.observed, trajectory.bridge, 0.0, np.random.default_rng(5), config)

    np.testing.assert_allclose(features[:, 0], features[0, 0], atol=1e-12)
    np.testing.assert_allclose(features[:, 1], 0.0, atol=1e-12)
    assert np.all(features[:, 2] == 0.0)


def test_spring_relaxes_distance_monotonically() -> None:
    config = SimConfig(drift_amplitude=0.0, brownian_sigma=0.0, obs_noise=0.0, initial_gap_range=(0.15, 0.2))
    trajectory = integrate_pair(CONNECTED, _always_on(), 0.0, config, np.random.default_rng(7))
    distance = np.linalg.norm(trajectory.positions[:, 1] - trajectory.positions[:, 0], axis=-1)

    assert np.all(np.diff(distance) <= 1e-12)
    assert distance[-1] == pytest.approx(trajectory.rest_length, abs=1e-6)


def test_feature_ranges() -> None:
    config = SimConfig()
    rng = np.random.default_rng(12)
    profile = sample_activity_profile(INTERMITTENT, rng)
    record = simulate_pair(NOT_CONNECTED, profile, 0.9, config, rng)
    features = np.asarray(record.features)

    assert features.shape == (config.frames, 6)
    assert np.all(features[:, 0] >= 0.0)
    assert np.all(np.abs(features[:, 2]) <= 1.0)
    assert np.all(features[:, 3] >= 0.0)
    assert np.all((features[:, 4:] >= 0.0) & (features[:, 4:] <= 1.0))
    assert features[0, 1] == 0.0


def test_bridge_evidence_separates_clean_labels() -> None:
    config = SimConfig()
    negatives, positives = [], []
    for index in range(100):
        rng = rngs.stream(3, "pairs", index)
        negative = simulate_pair(NOT_CONNECTED, sample_activity_profile(SHORT_LOCAL, rng), 0.0, config, rng)
        positive = simulate_pair(CONNECTED, _always_on(), 0.0, config, rng)
        negatives.append(np.asarray(negative.features)[:, 4].mean())
        positives.append(np.asarray(positive.features)[:, 4].mean())

    assert np.mean(negatives) < 0.05
    assert np.mean(positives) > 0.7


def test_full_size_plan_counts() -> None:
    plans = plan_pairs(SimConfig())
    per_regime = defaultdict(int)
    per_stratum = defaultdict(int)
    for plan in plans:
        per_regime[plan.regime] += 1
        per_stratum[plan.stratum] += 1

    assert len(plans) == 1680
    assert dict(per_regime) == {INTERMITTENT: 840, SHORT_LOCAL: 840}
    # two sequences per pair, so 420 pairs in the top stratum give 840 ambiguous records
    assert per_stratum[(0.75, 1.0)] == 420


def test_sequence_count_must_divide_by_four() -> None:
    with pytest.raises(ConfigError):
        plan_pairs(SimConfig(n_sequences=50))


def test_generated_dataset_layout() -> None:
    records, manifest = generate_dataset(SimConfig(n_sequences=64, frames=16, seed=5))
    counts = manifest.counts

    assert counts["total"] == 64
    assert counts["label:connected"] == counts["label:not_connected"] == 32
    assert counts["cell:connected/intermittent"] == 16
    assert counts["ambiguous"] == 16

    by_pair = defaultdict(list)
    for record in records:
        assert record.ambiguous == (record.alpha >= 0.75)
        by_pair[record.pair_id].append(record)
    for members in by_pair.values():
        first, second = members
        assert {first.label, second.label} == {"connected", "not_connected"}
        assert first.alpha == second.alpha
        assert first.activity == second.activity
        assert first.split == second.split


def test_generation_is_deterministic_and_worker_independent() -> None:
    config = SimConfig(n_sequences=32, frames=12, seed=9)
    serial, _ = generate_dataset(config)
    again, _ = generate_dataset(config)
    threaded, _ = generate_dataset(config.model_copy(update={"workers": 3}))

    assert to_jsonl(serial) == to_jsonl(again) == to_jsonl(threaded)
    other, _ = generate_dataset(config.model_copy(update={"seed": 10}))
    assert content_hash(other) != content_hash(serial)


def test_dataset_survives_disk(tmp_path) -> None:
    records, manifest = generate_dataset(SimConfig(n_sequences=16, frames=8, seed=2))
    path = write_dataset(records, manifest, tmp_path)

    loaded = read_dataset(tmp_path)
    assert path.name == "dataset.jsonl"
    assert content_hash(loaded) == manifest.content_hash
    table = SequenceTable.from_records(loaded)
    assert table.features.shape == (16, 8, 6)
    assert len(set(table.strata_keys())) == 16


def test_record_rejects_inconsistent_ambiguity_flag() -> None:
    with pytest.raises(ValidationError):
        SequenceRecord(
            id="seq-x",
            pair_id=0,
            label="connected",
            regime=SHORT_LOCAL,
            alpha=0.9,
            ambiguous=False,
            features=[[0.0] * 6],
        )


def _summary_statistics(features: np.ndarray) -> np.ndarray:
    return np.concatenate([features.mean(axis=1), features.std(axis=1), features.max(axis=1)], axis=1)


@pytest.mark.slow
def test_separability_degrades_with_ambiguity() -> None:
    from sklearn.linear_model import LogisticRegression
    from sklearn.model_selection import cross_val_score
    from sklearn.pipeline import make_pipeline
    from sklearn.preprocessing import StandardScaler

    records, _ = generate_dataset(SimConfig(n_sequences=1600, seed=1))
    table = SequenceTable.from_records(records)
    stats = _summary_statistics(table.features)
    classifier = make_pipeline(StandardScaler(), LogisticRegression(max_iter=2000))

    clean = table.alpha < 0.25
    very_high = table.ambiguous
    clean_acc = cross_val_score(classifier, stats[clean], table.labels[clean], cv=5).mean()
    high_acc = cross_val_score(classifier, stats[very_high], table.labels[very_high], cv=5).mean()

    assert clean_acc >= 0.9
    assert high_acc <= 0.75
