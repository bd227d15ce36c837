"""Screening evaluation: enrichment factor, AUPR, ROC-AUC and hit rate."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


class NoPositives(ValueError):
    pass


class SingleClass(ValueError):
    pass


class EmptyInput(ValueError):
    pass


def _arrays(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    if scores.size == 0:
        raise EmptyInput("no scored entries")
    return scores, labels


def rank_order(scores):
    """Indices by descending score; ties keep input order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def top_count(n, fraction):
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    # Fraction avoids float artefacts such as ceil(0.07 * 100) == 8.
    return max(1, math.ceil(Fraction(str(fraction)) * n))


def enrichment_factor(scores, labels, fraction=0.01):
    """(positives captured in the top ceil(fraction*N) / all positives) / fraction."""
    scores, labels = _arrays(scores, labels)
    total = int(labels.sum())
    if total == 0:
        raise NoPositives("enrichment factor needs at least one positive")
    n_top = top_count(scores.size, fraction)
    hits = int(labels[rank_order(scores)[:n_top]].sum())
    return (hits / total) / fraction


def _check_both(labels):
    pos = int(labels.sum())
    if pos == 0 or pos == labels.size:
        raise SingleClass("both classes must be present")
    return pos


def aupr(scores, labels):
    """Step-wise area under the precision-recall curve.

    Tied scores form one threshold: precision is evaluated after the whole
    tie block and weighted by the recall gained in that block.
    """
    scores, labels = _arrays(scores, labels)
    pos = _check_both(labels)
    order = rank_order(scores)
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    # last index of each run of equal scores
    ends = np.nonzero(np.r_[s[1:] != s[:-1], True])[0]
    tp_at = tp[ends]
    precision = tp_at / (ends + 1)
    recall_gain = np.diff(np.r_[0, tp_at]) / pos
    return float(np.sum(precision * recall_gain))


def auroc(scores, labels):
    """Mann-Whitney rank statistic; tied positive/negative pairs count 0.5."""
    scores, labels = _arrays(scores, labels)
    pos = _check_both(labels)
    neg = labels.size - pos
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    ranks = np.empty(s.size)
    starts = np.r_[0, np.nonzero(s[1:] != s[:-1])[0] + 1]
    ends = np.r_[starts[1:], s.size]
    for a, b in zip(starts, ends):
        ranks[a:b] = (a + b + 1) / 2.0  # mean of 1-based ranks a+1..b
    rank_sum = ranks[labels[order]].sum()
    return float((rank_sum - pos * (pos + 1) / 2.0) / (pos * neg))


def hit_rate(actives, tested):
    """Fraction of tested compounds that were active."""
    if tested <= 0:
        raise EmptyInput("no compounds tested")
    if not 0 <= actives <= tested:
        raise ValueError("actives must lie between 0 and the number tested")
    return actives / tested


def evaluate(scores, labels, fractions=(0.01, 0.05)):
    """Metrics block used by the CLI and the harness."""
    scores, labels = _arrays(scores, labels)
    out = {"n": int(scores.size), "positives": int(labels.sum())}
    for f in fractions:
        out[f"ef_{f:g}"] = enrichment_factor(scores, labels, f)
    out["aupr"] = aupr(scores, labels)
    out["auroc"] = auroc(scores, labels)
    return out
