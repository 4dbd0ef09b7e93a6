"""Metric oracles: brute-force pairwise AUROC, hand F1, aggregation."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metapred.metrics import Aggregate, MetricError, RunResult, aggregate_runs, \
    aggregate_table, auroc, f1, scores_to_predictions


def brute_force_auroc(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


def test_auroc_perfect_ranking():
    assert auroc([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == 1.0


def test_auroc_half_by_hand():
    npt.assert_allclose(auroc([0.9, 0.4, 0.6, 0.2], [1, 0, 0, 1]), 0.5)


def test_auroc_all_ties():
    assert auroc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5


def test_auroc_single_class_rejected():
    with pytest.raises(MetricError):
        auroc([0.1, 0.9], [1, 1])


def test_auroc_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(123)
    for trial in range(1000):
        n = int(rng.integers(2, 12))
        labels = np.zeros(n, dtype=int)
        labels[: int(rng.integers(1, n))] = 1
        rng.shuffle(labels)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = rng.choice([0.1, 0.25, 0.5, 0.75, 0.9], size=n)  # force ties
        npt.assert_allclose(auroc(scores, labels),
                            brute_force_auroc(scores, labels),
                            atol=1e-12, err_msg=f"trial {trial}")


@given(st.lists(st.tuples(st.sampled_from([i / 20 for i in range(21)]),
                          st.integers(0, 1)), min_size=4, max_size=40))
@settings(max_examples=100, deadline=None)
def test_auroc_invariant_under_monotone_transform(pairs):
    scores = np.array([p[0] for p in pairs])
    labels = np.array([p[1] for p in pairs])
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    base = auroc(scores, labels)
    npt.assert_allclose(auroc(np.exp(3 * scores) + 7, labels), base, atol=1e-12)


def test_auroc_label_flip_complement():
    rng = np.random.default_rng(5)
    scores = rng.permutation(20) / 20.0  # tie-free
    labels = np.array([1] * 8 + [0] * 12)
    npt.assert_allclose(auroc(scores, labels) + auroc(scores, 1 - labels), 1.0)


def test_f1_examples():
    assert f1([1, 0, 1, 0], [1, 0, 1, 0]) == 1.0
    npt.assert_allclose(f1([1, 1, 1, 0, 0], [1, 1, 0, 1, 0]), 2 / 3)
    assert f1([0, 0, 0], [1, 1, 0]) == 0.0


def test_f1_permutation_invariant():
    rng = np.random.default_rng(9)
    preds = rng.integers(0, 2, size=30)
    labels = rng.integers(0, 2, size=30)
    perm = rng.permutation(30)
    assert f1(preds, labels) == f1(preds[perm], labels[perm])


def test_threshold():
    npt.assert_array_equal(scores_to_predictions([0.49, 0.5, 0.51]), [0, 1, 1])


def test_aggregate_examples():
    runs = [RunResult("m", "t", 0.2, s, a, f)
            for s, (a, f) in enumerate([(0.6, 0.5), (0.8, 0.7)])]
    agg, = aggregate_runs(runs)
    npt.assert_allclose(agg.auroc_mean, 0.7)
    npt.assert_allclose(agg.auroc_std, np.std([0.6, 0.8], ddof=1))
    npt.assert_allclose(agg.auroc_std, 0.1414, atol=1e-4)


def test_aggregate_identical_runs_zero_std():
    runs = [RunResult("m", "t", 1.0, s, 0.75, 0.6) for s in range(5)]
    agg, = aggregate_runs(runs)
    assert agg.auroc_std == 0.0 and agg.n_runs == 5


def test_aggregate_groups_by_method_target_rho():
    runs = [RunResult("a", "t", 0.2, 0, 0.5, 0.5),
            RunResult("a", "t", 0.4, 0, 0.5, 0.5),
            RunResult("b", "t", 0.2, 0, 0.5, 0.5)]
    assert len(aggregate_runs(runs)) == 3
    with pytest.raises(MetricError):
        aggregate_runs([])


def test_formatting_matches_table_style():
    agg = Aggregate("m", "t", 0.2, 5, 0.7876, 0.02, 0.7225, 0.02)
    cell_a, cell_f = agg.formatted()
    assert cell_a == "0.7876 (.02)"
    assert cell_f == "0.7225 (.02)"


def test_run_result_round_trip_and_validation():
    r = RunResult("meta-cnn", "mci", 0.2, 3, 0.8123456, 0.71)
    assert RunResult.parse(r.row()) == RunResult("meta-cnn", "mci", 0.2, 3,
                                                 round(0.8123456, 6), 0.71)
    with pytest.raises(MetricError):
        RunResult("m", "t", 0.2, 0, 1.5, 0.5)


def test_aggregate_table_layout():
    table = aggregate_table(aggregate_runs(
        [RunResult("m", "t", 0.2, s, 0.7, 0.6) for s in range(2)]))
    lines = table.strip().splitlines()
    assert lines[0].split()[:2] == ["method", "target"]
    assert "0.7000" in lines[2]
