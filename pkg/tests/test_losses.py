import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aurascreen.losses import (
    DimensionMismatch,
    DistillPair,
    NonPositiveSigma,
    RankingGroup,
    SftBatch,
    distill_loss,
    dpo_loss,
    plackett_luce_prob,
    sft_loss,
)
from aurascreen.model import gradcheck


def direct_pl(scores, order, tau):
    """Plackett-Luce probability straight from the product formula."""
    p = 1.0
    remaining = list(order)
    for item in order:
        num = math.exp(scores[item] / tau)
        den = sum(math.exp(scores[j] / tau) for j in remaining)
        p *= num / den
        remaining.remove(item)
    return p


# --- sft ------------------------------------------------------------------------

def test_sft_examples():
    assert sft_loss(SftBatch([1.0, 2.0], [1.0, 2.0], lam=0.0))[0] == 0.0
    loss, grad = sft_loss(SftBatch([2.0], [0.0], [1.0], lam=0.0))
    assert loss == 4.0 and grad.tolist() == [4.0]
    assert sft_loss(SftBatch([2.0], [0.0], [2.0], lam=0.0))[0] == 1.0


def test_sft_penalty_and_errors():
    loss, _ = sft_loss(SftBatch([1.0, 1.0], [1.0, 1.0], input_grad_norms=[2.0, 4.0], lam=0.5))
    assert loss == pytest.approx(1.5)
    with pytest.raises(NonPositiveSigma):
        sft_loss(SftBatch([1.0], [0.0], [0.0]))
    with pytest.raises(DimensionMismatch):
        sft_loss(SftBatch([1.0, 2.0], [0.0]))


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(0.1, 5)), min_size=1, max_size=8),
       st.floats(0.1, 10))
def test_sft_scale_invariance(rows, c):
    yp, yt, s = (np.array(x) for x in zip(*rows))
    base = sft_loss(SftBatch(yp, yt, s, lam=0.0))[0]
    scaled = sft_loss(SftBatch(c * yp, c * yt, c * s, lam=0.0))[0]
    assert scaled == pytest.approx(base, rel=1e-9, abs=1e-12)


# --- Plackett-Luce -----------------------------------------------------------

def test_pl_examples():
    assert plackett_luce_prob(RankingGroup([0.3], (0,))) == 1.0
    p = plackett_luce_prob(RankingGroup([2.0, 1.0], (0, 1), tau=1.0))
    assert p == pytest.approx(math.e**2 / (math.e**2 + math.e), abs=1e-12)
    assert p == pytest.approx(0.73106, abs=1e-5)


@pytest.mark.parametrize("k", [2, 3, 4, 5])
@pytest.mark.parametrize("seed", range(3))
def test_pl_permutations_sum_to_one(k, seed):
    rng = np.random.default_rng(seed)
    scores = rng.normal(size=k)
    tau = [0.1, 0.5, 1.0][seed]
    probs = [plackett_luce_prob(RankingGroup(scores, perm, tau))
             for perm in itertools.permutations(range(k))]
    assert sum(probs) == pytest.approx(1.0, abs=1e-9)
    for perm, p in zip(itertools.permutations(range(k)), probs):
        assert p == pytest.approx(direct_pl(scores, perm, tau), rel=1e-9)


@settings(max_examples=100)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.floats(-100, 100), st.randoms())
def test_pl_shift_invariance(scores, shift, rnd):
    order = list(range(len(scores)))
    rnd.shuffle(order)
    a = plackett_luce_prob(RankingGroup(scores, order, 0.5))
    b = plackett_luce_prob(RankingGroup(np.array(scores) + shift, order, 0.5))
    assert b == pytest.approx(a, abs=1e-9)


def test_pl_extreme_scores_stay_finite():
    p = plackett_luce_prob(RankingGroup([1000.0, -1000.0], (1, 0), tau=0.1))
    assert 0.0 <= p < 1e-300


def test_group_validation():
    with pytest.raises(ValueError):
        RankingGroup([1.0, 2.0], (0, 0))
    with pytest.raises(ValueError):
        RankingGroup([1.0], (0,), tau=0.0)


# --- DPO ----------------------------------------------------------------------

def test_dpo_examples():
    assert dpo_loss([RankingGroup([1.0], (0,)), RankingGroup([5.0], (0,))])[0] == 0.0
    g = RankingGroup([2.0, 1.0], (0, 1), tau=1.0)
    assert dpo_loss([g])[0] == pytest.approx(0.31326, abs=1e-5)
    g.confidence = 0.5
    assert dpo_loss([g])[0] == pytest.approx(0.15663, abs=1e-5)


def test_dpo_monotone_in_top_score():
    base = dpo_loss([RankingGroup([0.5, 0.2, 0.9], (0, 2, 1), 0.1)])[0]
    up = dpo_loss([RankingGroup([0.6, 0.2, 0.9], (0, 2, 1), 0.1)])[0]
    assert up < base


@pytest.mark.parametrize("seed", range(5))
def test_dpo_gradcheck(seed):
    rng = np.random.default_rng(seed)
    ks = [int(k) for k in rng.integers(1, 6, size=4)]
    orders = [tuple(rng.permutation(k)) for k in ks]
    conf = rng.random(4)
    params = {f"g{i}": rng.normal(size=k) for i, k in enumerate(ks)}

    def groups(p):
        return [RankingGroup(p[f"g{i}"], orders[i], 0.3, conf[i]) for i in range(4)]

    def grad_f(p):
        return {f"g{i}": g for i, g in enumerate(dpo_loss(groups(p))[1])}

    err, _ = gradcheck(lambda p: dpo_loss(groups(p))[0], grad_f, params)
    assert err < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_sft_gradcheck(seed):
    rng = np.random.default_rng(seed)
    yt, sig = rng.normal(size=6), rng.uniform(0.5, 2, size=6)
    err, _ = gradcheck(lambda p: sft_loss(SftBatch(p["y"], yt, sig, lam=0.0))[0],
                       lambda p: {"y": sft_loss(SftBatch(p["y"], yt, sig, lam=0.0))[1]},
                       {"y": rng.normal(size=6)})
    assert err < 1e-4


# --- distillation ------------------------------------------------------------

def test_distill_examples():
    assert distill_loss(DistillPair([1.0, 2.0], [1.0, 2.0], 0.5, 0.5))[0] == 0.0
    loss, gh, gy = distill_loss(DistillPair([3.0, 4.0], [0.0, 0.0], 2.0, 0.0))
    assert loss == 7.0
    assert gh.tolist() == [0.6, 0.8] and gy == 1.0
    assert distill_loss(DistillPair([1.0], [1.0], 1.5, 0.0, alpha=0.0, beta=2.0))[0] == 3.0


def test_distill_subgradient_and_errors():
    _, gh, gy = distill_loss(DistillPair([1.0, 1.0], [1.0, 1.0], 2.0, 2.0))
    assert gh.tolist() == [0.0, 0.0] and gy == 0.0
    with pytest.raises(DimensionMismatch):
        distill_loss(DistillPair([1.0], [1.0, 2.0], 0.0, 0.0))


@pytest.mark.parametrize("seed", range(5))
def test_distill_gradcheck(seed):
    rng = np.random.default_rng(seed)
    h_main, y_true = rng.normal(size=5), rng.normal()
    a, b = rng.uniform(0.1, 2, size=2)

    def parts(p):
        return distill_loss(DistillPair(p["h"], h_main, p["y"][0], y_true, a, b))

    err, _ = gradcheck(lambda p: parts(p)[0],
                       lambda p: {"h": parts(p)[1], "y": np.array([parts(p)[2]])},
                       {"h": rng.normal(size=5), "y": np.array([y_true + 0.7])})
    assert err < 1e-4
