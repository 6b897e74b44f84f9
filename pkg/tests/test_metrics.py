"""Selective metrics against counting oracles, plus the exact Wilcoxon test."""

from fractions import Fraction

import numpy as np
import pytest

from chase.errors import InvalidInputError, UndefinedMetricError
from chase.labels import ABSTAIN
from chase.metrics import (
    OVERALL,
    VERY_HIGH,
    ScoredPredictions,
    abstain_alignment,
    evaluate_subsets,
    metric_report,
    no_abstain_accuracy,
    risk_at_coverage,
    risk_coverage_curve,
    three_way_accuracy,
    wilcoxon_one_sided,
)
from chase.models import calibrate_threshold

C, N = 0, 1


def _scored(prediction, labels, ambiguous, scores) -> ScoredPredictions:
    return ScoredPredictions(
        np.asarray(prediction), np.asarray(labels), np.asarray(ambiguous, dtype=bool), np.asarray(scores, dtype=float)
    )


def test_no_abstain_accuracy_examples() -> None:
    assert no_abstain_accuracy(np.array([C, N, N]), np.array([C, N, N])) == 1.0
    assert no_abstain_accuracy(np.array([C, C, N, N]), np.array([C, N, N, C])) == 0.5
    assert no_abstain_accuracy(np.array([N]), np.array([C])) == 0.0
    with pytest.raises(InvalidInputError):
        no_abstain_accuracy(np.array([]), np.array([]))


def test_risk_at_coverage_examples() -> None:
    scored = _scored([C, C, N, N, C], [C, C, N, C, N], [0, 0, 0, 0, 1], [0.9, 0.8, 0.7, 0.6, 0.1])
    assert risk_at_coverage(scored, 0.6) == (0.25, 0.8)

    risk, coverage = risk_at_coverage(scored, -np.inf)
    assert coverage == 1.0
    assert risk == pytest.approx(1.0 - no_abstain_accuracy(scored.prediction, scored.labels))

    with pytest.raises(UndefinedMetricError):
        risk_at_coverage(scored, 0.95)


def test_three_way_accuracy_examples() -> None:
    decisions = np.array([C, ABSTAIN, N])
    assert three_way_accuracy(decisions, np.array([C, N, C]), np.array([False, True, False])) == pytest.approx(2 / 3)
    all_abstain = np.full(4, ABSTAIN)
    assert three_way_accuracy(all_abstain, np.zeros(4, int), np.ones(4, bool)) == 1.0
    assert three_way_accuracy(all_abstain, np.zeros(4, int), np.zeros(4, bool)) == 0.0


def test_abstain_alignment_examples() -> None:
    assert abstain_alignment(np.array([ABSTAIN, ABSTAIN, C]), np.array([True, False, True])) == 0.5
    with pytest.raises(UndefinedMetricError):
        abstain_alignment(np.array([C, N]), np.array([True, True]))


def test_ambiguous_subset_always_aligns() -> None:
    rng = np.random.default_rng(6)
    for _ in range(50):
        n = 30
        scored = _scored(rng.integers(0, 2, n), rng.integers(0, 2, n), rng.integers(0, 2, n), rng.uniform(size=n))
        reports = evaluate_subsets(scored, calibrate_threshold(scored.scores, 0.8), 0.8)
        if reports[VERY_HIGH].abstain_alignment is not None:
            assert reports[VERY_HIGH].abstain_alignment == 1.0


def test_undefined_metrics_become_none() -> None:
    scored = _scored([C, N], [C, C], [0, 1], [0.4, 0.6])
    report = metric_report(scored, tau=0.0, target=1.0)
    assert report.abstain_alignment is None
    assert report.three_way_acc == report.no_abstain_acc == 0.5

    nothing_accepted = metric_report(scored, tau=0.9, target=0.8)
    assert nothing_accepted.risk_at_coverage is None
    assert nothing_accepted.realized_coverage == 0.0


def _oracle(prediction, labels, ambiguous, scores, tau):
    """Integer counting over python lists, independent of the vectorized code."""

    n = len(labels)
    accepted = [i for i in range(n) if scores[i] >= tau]
    abstained = [i for i in range(n) if scores[i] < tau]
    na = Fraction(sum(prediction[i] == labels[i] for i in range(n)), n)
    risk = Fraction(sum(prediction[i] != labels[i] for i in accepted), len(accepted)) if accepted else None
    three_way = Fraction(
        sum(prediction[i] == labels[i] for i in accepted) + sum(bool(ambiguous[i]) for i in abstained), n
    )
    aa = Fraction(sum(bool(ambiguous[i]) for i in abstained), len(abstained)) if abstained else None
    return na, risk, three_way, aa, Fraction(len(accepted), n)


def _threshold_oracle(scores, coverage):
    """Largest observed score whose acceptance set covers the target."""

    n = len(scores)
    target = Fraction(coverage).limit_denominator(10**9)
    for s in sorted(set(scores), reverse=True):
        if Fraction(sum(x >= s for x in scores), n) >= target:
            return s
    raise AssertionError("no threshold reaches the target")


def test_metrics_match_counting_oracle_on_random_sets() -> None:
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        prediction = rng.integers(0, 2, n)
        labels = rng.integers(0, 2, n)
        ambiguous = rng.integers(0, 2, n).astype(bool)
        scores = rng.integers(0, 12, n) / 11.0
        coverage = float(rng.choice([0.5, 0.8, 0.9, 1.0]))
        scored = _scored(prediction, labels, ambiguous, scores)

        tau = calibrate_threshold(scores, coverage)
        assert tau == _threshold_oracle(scores.tolist(), coverage)

        columns = (prediction.tolist(), labels.tolist(), ambiguous.tolist(), scores.tolist())
        na, risk, three_way, aa, realized = _oracle(*columns, tau)
        report = metric_report(scored, tau, coverage)
        assert report.no_abstain_acc == float(na)
        assert report.risk_at_coverage == (None if risk is None else float(risk))
        assert report.three_way_acc == float(three_way)
        assert report.abstain_alignment == (None if aa is None else float(aa))
        assert report.realized_coverage == float(realized)
        assert realized >= Fraction(coverage).limit_denominator(10**9)


def test_full_coverage_three_way_equals_no_abstain() -> None:
    rng = np.random.default_rng(3)
    scored = _scored(rng.integers(0, 2, 25), rng.integers(0, 2, 25), rng.integers(0, 2, 25), rng.uniform(size=25))
    report = metric_report(scored, calibrate_threshold(scored.scores, 1.0), 1.0)
    assert report.three_way_acc == report.no_abstain_acc
    assert report.subset == OVERALL


def test_lower_thresholds_never_reduce_coverage() -> None:
    scores = np.random.default_rng(1).uniform(size=50)
    scored = _scored(np.zeros(50, int), np.zeros(50, int), np.zeros(50, int), scores)
    coverage = [float(np.mean(scored.decide(tau) != ABSTAIN)) for tau in np.linspace(1.0, 0.0, 30)]
    assert coverage == sorted(coverage)


def test_risk_coverage_curve_cuts_after_ties() -> None:
    scored = _scored([C, N, C, C], [C, C, C, N], [0, 0, 0, 0], [0.9, 0.5, 0.5, 0.2])
    coverage, risk = risk_coverage_curve(scored)
    np.testing.assert_allclose(coverage, [0.25, 0.75, 1.0])
    np.testing.assert_allclose(risk, [0.0, 1 / 3, 0.5])


def test_scored_columns_must_align() -> None:
    with pytest.raises(ValueError):
        _scored([C, N], [C], [0, 0], [0.1, 0.2])


@pytest.mark.parametrize(
    "diffs, expected",
    [
        ([0.5, 1.0, 2.0, 0.1, 3.0], 1 / 32),
        ([2.0, -2.0], 0.75),
        ([0.3], 0.5),
        ([-1.0, -2.0, -3.0], 1.0),
        ([1.0, 0.0, 2.0], 0.25),
    ],
)
def test_wilcoxon_exact_values(diffs, expected) -> None:
    assert wilcoxon_one_sided(diffs) == pytest.approx(expected, abs=1e-12)


def test_wilcoxon_all_zero_is_undefined() -> None:
    with pytest.raises(UndefinedMetricError):
        wilcoxon_one_sided([0.0, 0.0, 0.0])


def test_wilcoxon_large_samples_use_the_normal_approximation() -> None:
    diffs = np.arange(1, 31, dtype=float)
    assert wilcoxon_one_sided(diffs) < 1e-5
    assert wilcoxon_one_sided(-diffs) > 0.99
