"""Training objectives with analytic gradients.

* ``sft_loss``: uncertainty-scaled squared error plus a gradient penalty.
* ``plackett_luce_prob`` / ``dpo_loss``: listwise ranking likelihood.
* ``distill_loss``: representation + label matching for the student.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TAU = 0.1
DEFAULT_LAMBDA = 0.01


class NonPositiveSigma(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass
class SftBatch:
    y_pred: np.ndarray
    y_true: np.ndarray
    sigma_exp: np.ndarray = None
    input_grad_norms: np.ndarray = None
    lam: float = DEFAULT_LAMBDA


def sft_loss(batch):
    """``mean(((y_pred - y_true) / sigma)^2) + lam * mean(grad_norms)``.

    Returns ``(loss, dloss/dy_pred)``. The penalty term is treated as a
    constant with respect to ``y_pred``.
    """
    y_pred = np.atleast_1d(np.asarray(batch.y_pred, dtype=np.float64))
    y_true = np.atleast_1d(np.asarray(batch.y_true, dtype=np.float64))
    if y_pred.shape != y_true.shape or y_pred.size == 0:
        raise DimensionMismatch("y_pred and y_true must be equal-length and non-empty")
    sigma = np.ones_like(y_pred) if batch.sigma_exp is None else \
        np.broadcast_to(np.asarray(batch.sigma_exp, dtype=np.float64), y_pred.shape)
    if np.any(sigma <= 0):
        raise NonPositiveSigma("sigma_exp must be > 0")
    b = y_pred.size
    r = (y_pred - y_true) / sigma
    loss = float(np.mean(r * r))
    if batch.input_grad_norms is not None and batch.lam:
        loss += batch.lam * float(np.mean(batch.input_grad_norms))
    grad = 2.0 * r / sigma / b
    return loss, grad


@dataclass
class RankingGroup:
    scores: np.ndarray
    true_order: tuple
    tau: float = DEFAULT_TAU
    confidence: float = 1.0

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).ravel()
        k = self.scores.size
        if k < 1:
            raise ValueError("a ranking group needs at least one item")
        if sorted(self.true_order) != list(range(k)):
            raise ValueError("true_order must be a permutation of 0..K-1")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if not 0 <= self.confidence <= 1:
            raise ValueError("confidence must lie in [0, 1]")


def _suffix_logsumexp(x):
    """out[k] = log(sum(exp(x[k:]))), computed stably."""
    out = np.empty_like(x)
    acc = -np.inf
    for k in range(x.size - 1, -1, -1):
        acc = np.logaddexp(acc, x[k])
        out[k] = acc
    return out


def plackett_luce_logprob(scores, true_order, tau=DEFAULT_TAU):
    """log P(true_order | scores) and its gradient in ``scores``."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    order = np.asarray(true_order, dtype=np.int64)
    x = scores[order] / tau
    lse = _suffix_logsumexp(x)
    logp = float(np.sum(x - lse))
    # d/dx_m of -sum_k lse_k = -sum_{k<=m} softmax_k(x)[m]
    grad_x = np.ones_like(x)
    for k in range(x.size):
        grad_x[k:] -= np.exp(x[k:] - lse[k])
    grad = np.zeros_like(scores)
    grad[order] = grad_x / tau
    return logp, grad


def plackett_luce_prob(group):
    """Probability of ``group.true_order`` under the Plackett-Luce model."""
    logp, _ = plackett_luce_logprob(group.scores, group.true_order, group.tau)
    return float(np.exp(logp))


def dpo_loss(groups):
    """``-(1/B) sum_j confidence_j * log P_j``; returns ``(loss, [grad per group])``."""
    groups = list(groups)
    if not groups:
        raise ValueError("dpo_loss needs at least one group")
    b = len(groups)
    loss = 0.0
    grads = []
    for g in groups:  # sequential reduction keeps the sum order fixed
        logp, grad = plackett_luce_logprob(g.scores, g.true_order, g.tau)
        loss -= g.confidence * logp / b
        grads.append(-g.confidence * grad / b)
    return loss, grads


@dataclass
class DistillPair:
    h_pred: np.ndarray
    h_main: np.ndarray
    y_pred: float
    y_true: float
    alpha: float = 1.0
    beta: float = 1.0


def distill_loss(pair):
    """``alpha*||h_pred - h_main|| + beta*|y_pred - y_true|``.

    Returns ``(loss, dloss/dh_pred, dloss/dy_pred)``; the subgradient is 0
    where either term is non-differentiable.
    """
    h_pred = np.asarray(pair.h_pred, dtype=np.float64).ravel()
    h_main = np.asarray(pair.h_main, dtype=np.float64).ravel()
    if h_pred.shape != h_main.shape:
        raise DimensionMismatch(f"h_pred has {h_pred.size} dims, h_main {h_main.size}")
    if pair.alpha < 0 or pair.beta < 0:
        raise ValueError("alpha and beta must be >= 0")
    diff = h_pred - h_main
    norm = float(np.sqrt(np.dot(diff, diff)))
    dy = float(pair.y_pred) - float(pair.y_true)
    loss = pair.alpha * norm + pair.beta * abs(dy)
    grad_h = pair.alpha * diff / norm if norm > 0 else np.zeros_like(diff)
    grad_y = pair.beta * float(np.sign(dy))
    return loss, grad_h, grad_y
