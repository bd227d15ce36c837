import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aurascreen.metrics import (
    EmptyInput,
    NoPositives,
    SingleClass,
    aupr,
    auroc,
    enrichment_factor,
    evaluate,
    hit_rate,
    top_count,
)


def brute_ef(scores, labels, fraction):
    n = len(scores)
    n_top = max(1, math.ceil(round(fraction * n, 9)))
    ranked = sorted(range(n), key=lambda i: (-scores[i], i))
    hits = sum(labels[i] for i in ranked[:n_top])
    return (hits / sum(labels)) / fraction


def sweep_aupr(scores, labels):
    pos = sum(labels)
    area, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        picked = [y for s, y in zip(scores, labels) if s >= t]
        recall = sum(picked) / pos
        area += (recall - prev_recall) * (sum(picked) / len(picked))
        prev_recall = recall
    return area


def pairwise_auroc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def test_ef_fixture_n200():
    scores = np.linspace(1, 0, 200)
    labels = np.zeros(200, bool)
    labels[[0, 1, 50, 150]] = True
    assert enrichment_factor(scores, labels, 0.01) == 50.0


def test_ef_all_positives_last():
    labels = np.r_[np.zeros(95, bool), np.ones(5, bool)]
    assert enrichment_factor(np.linspace(1, 0, 100), labels, 0.01) == 0.0


def test_ef_ties_keep_input_order():
    assert enrichment_factor([1, 1, 1, 1], [0, 1, 0, 0], 0.25) == 0.0
    assert enrichment_factor([1, 1, 1, 1], [1, 0, 0, 0], 0.25) == 4.0


def test_ef_errors():
    with pytest.raises(NoPositives):
        enrichment_factor([1, 2], [0, 0])
    with pytest.raises(ValueError):
        enrichment_factor([1, 2], [1, 0], 0.0)


def test_top_count_ceiling():
    assert top_count(200, 0.01) == 2
    assert top_count(100, 0.07) == 7
    assert top_count(10, 0.01) == 1
    assert top_count(101, 0.01) == 2


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=1, max_size=60),
       st.sampled_from([0.01, 0.05, 0.1, 0.25, 0.5, 1.0]))
def test_ef_matches_counting_oracle(rows, fraction):
    scores = [s for s, _ in rows]
    labels = [y for _, y in rows]
    if not any(labels):
        return
    assert enrichment_factor(scores, labels, fraction) == pytest.approx(brute_ef(scores, labels, fraction))
    assert enrichment_factor(scores, labels, fraction) <= 1 / fraction + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-50, 50), st.booleans()), min_size=2, max_size=40))
def test_ef_invariant_under_monotone_transform(rows):
    scores = np.array([s / 10 for s, _ in rows])
    labels = [y for _, y in rows]
    if not any(labels):
        return
    assert enrichment_factor(scores, labels, 0.1) == enrichment_factor(np.exp(scores) * 3 + 1, labels, 0.1)


def test_six_point_fixture():
    scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4]
    labels = [1, 0, 1, 1, 0, 0]
    # hand sweep: (1/3)(1 + 2/3 + 3/4); pairs won 7 of 9
    assert aupr(scores, labels) == pytest.approx((1 + 2 / 3 + 3 / 4) / 3, abs=1e-9)
    assert auroc(scores, labels) == pytest.approx(7 / 9, abs=1e-9)


def test_perfect_and_tied():
    assert aupr([3, 2, 1, 0], [1, 1, 0, 0]) == 1.0
    assert auroc([3, 2, 1, 0], [1, 1, 0, 0]) == 1.0
    assert auroc([1, 1, 1, 1], [1, 0, 1, 0]) == 0.5
    with pytest.raises(SingleClass):
        auroc([1, 2], [1, 1])
    with pytest.raises(SingleClass):
        aupr([1, 2], [0, 0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.booleans()), min_size=2, max_size=40))
def test_aupr_auroc_match_oracles(rows):
    scores = [float(s) for s, _ in rows]
    labels = [y for _, y in rows]
    if all(labels) or not any(labels):
        return
    assert aupr(scores, labels) == pytest.approx(sweep_aupr(scores, labels), abs=1e-12)
    assert auroc(scores, labels) == pytest.approx(pairwise_auroc(scores, labels), abs=1e-12)


def test_auroc_monte_carlo():
    rng = np.random.default_rng(7)
    labels = rng.random(400) < 0.3
    scores = rng.normal(size=400) + labels
    pos, neg = scores[labels], scores[~labels]
    i = rng.integers(0, pos.size, 100_000)
    j = rng.integers(0, neg.size, 100_000)
    mc = np.mean(pos[i] > neg[j])
    assert abs(auroc(scores, labels) - mc) < 0.01


def test_hit_rate():
    assert round(hit_rate(23, 33), 3) == 0.697
    assert round(hit_rate(2, 30), 3) == 0.067
    with pytest.raises(EmptyInput):
        hit_rate(0, 0)


def test_evaluate_block():
    out = evaluate([0.9, 0.8, 0.7, 0.6, 0.5, 0.4], [1, 0, 1, 1, 0, 0])
    assert set(out) == {"n", "positives", "ef_0.01", "ef_0.05", "aupr", "auroc"}
    assert out["ef_0.01"] == pytest.approx((1 / 3) / 0.01)
