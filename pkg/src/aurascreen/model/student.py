"""The fast student scorer.

Three tokens (fingerprint, protein embedding, structural prior) are projected
to a shared width, tagged with a type embedding, passed through a small
self-attention stack and mean-pooled. The pooled vector yields a hidden
representation in the prior space (``h_pred``) and a scalar fitness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .params import ShapeMismatch


@dataclass
class StudentInput:
    """Batched student inputs: ``fp (B, W)``, ``protein (B, D_prot)``, ``prior (B, D_prior)``."""

    fp: np.ndarray
    protein: np.ndarray
    prior: np.ndarray

    def __post_init__(self):
        self.fp = np.atleast_2d(np.asarray(self.fp, dtype=np.float64))
        b = self.fp.shape[0]
        self.protein = np.broadcast_to(np.asarray(self.protein, dtype=np.float64),
                                       (b, np.shape(self.protein)[-1]))
        self.prior = np.atleast_2d(np.asarray(self.prior, dtype=np.float64))
        if self.prior.shape[0] != b:
            raise ShapeMismatch("prior batch size differs from fingerprint batch size")


def _check(inp, cfg):
    for name, arr, dim in (("fp", inp.fp, cfg.fp_width), ("protein", inp.protein, cfg.d_prot),
                           ("prior", inp.prior, cfg.d_prior)):
        if arr.shape[-1] != dim:
            raise ShapeMismatch(f"{name} has dimension {arr.shape[-1]}, expected {dim}")


def student_forward(fp, prot, prior, P, cfg):
    """Tape-level forward on Var inputs; returns ``(h_pred (B, D_prior), y_pred (B,))``."""
    B = fp.shape[0]
    w, h = cfg.width, cfg.n_heads
    c = w // h
    tokens = ad.stack([fp @ P["stu.fp_proj"], prot @ P["stu.prot_proj"],
                       prior @ P["stu.prior_proj"]], axis=1) + P["stu.type_emb"]
    x = tokens  # (B, 3, w)
    for b in range(cfg.n_blocks):
        k = f"stu.{b}."
        xn = ad.layer_norm(x, P[k + "att_ln.gamma"], P[k + "att_ln.beta"], cfg.ln_eps)
        q = ad.reshape(xn @ P[k + "wq"], (B, 3, h, c))
        kk = ad.reshape(xn @ P[k + "wk"], (B, 3, h, c))
        v = ad.reshape(xn @ P[k + "wv"], (B, 3, h, c))
        logits = ad.einsum("bihc,bjhc->bijh", q, kk) * (1.0 / np.sqrt(c))
        att = ad.masked_softmax(logits, True, axis=2)
        o = ad.reshape(ad.einsum("bijh,bjhc->bihc", att, v), (B, 3, w))
        x = x + o @ P[k + "wo"]
        xn = ad.layer_norm(x, P[k + "tr_ln.gamma"], P[k + "tr_ln.beta"], cfg.ln_eps)
        x = x + ad.gelu(xn @ P[k + "tr_w1"] + P[k + "tr_b1"]) @ P[k + "tr_w2"] + P[k + "tr_b2"]
    hidden = ad.sum_(x, axis=1) * (1.0 / 3.0)
    h_pred = hidden @ P["stu.h_w"] + P["stu.h_b"]
    y_pred = ad.reshape(hidden @ P["stu.y_w"] + P["stu.y_b"], (B,))
    return h_pred, y_pred


def aurofast_forward(inp, params, cfg):
    """Plain-array forward: ``(h_pred (B, D_prior), y_pred (B,))``."""
    if cfg.width % cfg.n_heads:
        raise ShapeMismatch("student width must be divisible by n_heads")
    _check(inp, cfg)
    P = {k: ad.Var(v) for k, v in params.items()}
    h_pred, y_pred = student_forward(ad.Var(inp.fp), ad.Var(inp.protein), ad.Var(inp.prior), P, cfg)
    return h_pred.value, y_pred.value


def input_grad_norms(inp, params, cfg):
    """Per-example ``||d y_pred / d x||`` with x the concatenated input features."""
    _check(inp, cfg)
    P = {k: ad.Var(v) for k, v in params.items()}
    xs = [ad.Var(inp.fp), ad.Var(inp.protein.copy()), ad.Var(inp.prior)]
    _, y_pred = student_forward(*xs, P, cfg)
    ad.backward(ad.sum_(y_pred))  # examples are independent, so one sweep suffices
    sq = sum((x.grad ** 2).sum(axis=1) for x in xs)
    return np.sqrt(sq)
