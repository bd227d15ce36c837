"""Pair-aware encoder and the ligand-weighted affinity head.

All functions take a leading batch axis. ``P`` is a ``{name: Var}`` map of
teacher parameters (see :func:`params.init_teacher_params`); callers that
only need values can pass :func:`as_vars` of a plain array dict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .params import ShapeMismatch


class ZeroLigandTokens(ValueError):
    pass


class ZeroProteinTokens(ValueError):
    pass


class NonFiniteActivation(FloatingPointError):
    pass


@dataclass
class TokenReps:
    """Batched single and pair representations with their masks.

    Shapes: s ``(B, N, d_single)``, z ``(B, N, N, d_pair)``, single_mask and
    is_ligand ``(B, N)``, pair_mask ``(B, N, N)``. ``s`` and ``z`` may be
    arrays or :class:`autodiff.Var`.
    """

    s: object
    z: object
    single_mask: np.ndarray
    pair_mask: np.ndarray
    is_ligand: np.ndarray

    def __post_init__(self):
        self.single_mask = np.asarray(self.single_mask, dtype=bool)
        self.pair_mask = np.asarray(self.pair_mask, dtype=bool)
        self.is_ligand = np.asarray(self.is_ligand, dtype=bool) & self.single_mask
        s, z = _value(self.s), _value(self.z)
        if s.ndim != 3 or z.ndim != 4:
            raise ShapeMismatch("s must be (B, N, d_single) and z (B, N, N, d_pair)")
        b, n = s.shape[:2]
        if z.shape[:3] != (b, n, n):
            raise ShapeMismatch(f"z leading shape {z.shape[:3]} does not match s {(b, n, n)}")
        for name, arr, shape in (("single_mask", self.single_mask, (b, n)),
                                 ("is_ligand", self.is_ligand, (b, n)),
                                 ("pair_mask", self.pair_mask, (b, n, n))):
            if arr.shape != shape:
                raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {shape}")

    @property
    def num_ligand(self):
        return self.is_ligand.sum(axis=1)

    @property
    def num_protein(self):
        return (self.single_mask & ~self.is_ligand).sum(axis=1)

    def with_features(self, s, z):
        return TokenReps(s, z, self.single_mask, self.pair_mask, self.is_ligand)


@dataclass
class FitnessOutput:
    per_token_affinity: np.ndarray  # (B, N)
    raw_weights: np.ndarray  # (B, N)
    norm_weights: np.ndarray  # (B, N)
    affinity: np.ndarray  # (B,)
    affinity_var: object = None  # autodiff handle for training


def _value(x):
    return x.value if isinstance(x, ad.Var) else np.asarray(x, dtype=np.float64)


def as_vars(params):
    return {k: ad.Var(v, name=k) for k, v in params.items()}


def _check_finite(var, where):
    if not np.all(np.isfinite(var.value)):
        raise NonFiniteActivation(f"non-finite activation in {where}")


def _ln(x, P, prefix, eps):
    beta = P.get(prefix + ".beta", 0.0)  # absent where a shift would be inert
    return ad.layer_norm(x, P[prefix + ".gamma"], beta, eps)


def encoder_block(s, z, reps, P, b, cfg):
    """One block: pair-biased attention, transition, outer-product pair update, pair transition."""
    k = f"enc.{b}."
    B, N = reps.single_mask.shape
    h, c = cfg.n_heads, cfg.head_dim
    smask = reps.single_mask[..., None].astype(np.float64)
    pmask = (reps.pair_mask & reps.single_mask[:, :, None] & reps.single_mask[:, None, :])
    # attention over keys j for query i, with an additive bias from z[i, j]
    xs = _ln(s, P, k + "att_ln", cfg.ln_eps)
    q = ad.reshape(xs @ P[k + "wq"], (B, N, h, c))
    kk = ad.reshape(xs @ P[k + "wk"], (B, N, h, c))
    v = ad.reshape(xs @ P[k + "wv"], (B, N, h, c))
    bias = _ln(z, P, k + "bias_ln", cfg.ln_eps) @ P[k + "wb"]  # (B, N, N, h)
    logits = ad.einsum("bihc,bjhc->bijh", q, kk) * (1.0 / np.sqrt(c)) + bias
    key_mask = (reps.pair_mask & reps.single_mask[:, None, :])[..., None]
    att = ad.masked_softmax(logits, key_mask, axis=2)
    o = ad.reshape(ad.einsum("bijh,bjhc->bihc", att, v), (B, N, h * c))
    s = s + (o @ P[k + "wo"]) * smask
    # single transition
    xs = _ln(s, P, k + "tr_ln", cfg.ln_eps)
    t = ad.gelu(xs @ P[k + "tr_w1"] + P[k + "tr_b1"]) @ P[k + "tr_w2"] + P[k + "tr_b2"]
    s = s + t * smask
    # outer-product pair update
    xs = _ln(s, P, k + "opm_ln", cfg.ln_eps)
    a = xs @ P[k + "opm_a"]
    bb = xs @ P[k + "opm_b"]
    op = ad.einsum("bide,bjd->bije", ad.einsum("bic,cde->bide", a, P[k + "opm_w"]), bb)
    zmask = pmask[..., None].astype(np.float64)
    z = z + (op + P[k + "opm_bias"]) * zmask
    # pair transition
    xz = _ln(z, P, k + "ptr_ln", cfg.ln_eps)
    t = ad.gelu(xz @ P[k + "ptr_w1"] + P[k + "ptr_b1"]) @ P[k + "ptr_w2"] + P[k + "ptr_b2"]
    z = z + t * zmask
    _check_finite(s, f"encoder block {b} (single)")
    _check_finite(z, f"encoder block {b} (pair)")
    return s, z


def pair_encoder(reps, P, cfg):
    """Residual stack of ``cfg.n_blocks`` encoder blocks; returns updated TokenReps."""
    s, z = ad.as_var(reps.s), ad.as_var(reps.z)
    if s.shape[-1] != cfg.d_single or z.shape[-1] != cfg.d_pair:
        raise ShapeMismatch(f"expected d_single={cfg.d_single}, d_pair={cfg.d_pair}; "
                            f"got {s.shape[-1]}, {z.shape[-1]}")
    for b in range(cfg.n_blocks):
        s, z = encoder_block(s, z, reps, P, b, cfg)
    return reps.with_features(s, z)


def head_pair_mask(reps):
    """Pairs that feed the pair branch: valid, and not protein-protein."""
    prot = reps.single_mask & ~reps.is_ligand
    valid = reps.pair_mask & reps.single_mask[:, :, None] & reps.single_mask[:, None, :]
    return valid & ~(prot[:, :, None] & prot[:, None, :])


def token_weights(reps, cfg):
    """Raw per-token weights and their masked softmax (both ``(B, N)``)."""
    n_lig = reps.num_ligand
    n_prot = reps.num_protein
    if np.any(n_lig < 1):
        raise ZeroLigandTokens("every complex needs at least one ligand token")
    if np.any(n_prot < 1):
        raise ZeroProteinTokens("every complex needs at least one protein token")
    ratio = cfg.ligand_weight_ratio * n_prot / n_lig
    lig = reps.is_ligand.astype(np.float64)
    raw = (lig * ratio[:, None] + (1.0 - lig)) * reps.single_mask
    norm = ad.masked_softmax(ad.Var(raw / cfg.temperature), reps.single_mask, axis=1).value
    return raw, norm


def _gated_mlp(x, P, tag, eps):
    k = f"head.{tag}_"
    xn = _ln(x, P, k + "ln", eps)
    gate = ad.sigmoid(xn @ P[k + "gate"])
    mlp = ad.gelu(xn @ P[k + "w1"] + P[k + "b1"]) @ P[k + "w2"] + P[k + "b2"]
    return gate * mlp


def affinity_head(reps, P, cfg):
    """Per-token affinities from both branches, pooled with ligand-upweighted softmax weights."""
    raw, norm = token_weights(reps, cfg)
    s, z = ad.as_var(reps.s), ad.as_var(reps.z)
    B, N = reps.single_mask.shape
    s_aff = ad.reshape(_gated_mlp(s, P, "s", cfg.ln_eps), (B, N))
    zt = ad.reshape(_gated_mlp(z, P, "z", cfg.ln_eps), (B, N, N))
    hp = head_pair_mask(reps).astype(np.float64)
    count = np.maximum(hp.sum(axis=2), 1.0)
    z_aff = ad.sum_(zt * hp, axis=2) * (1.0 / count)
    per_token = s_aff + z_aff
    affinity = ad.sum_(per_token * norm, axis=1)
    _check_finite(affinity, "affinity head")
    return FitnessOutput(per_token.value, raw, norm, affinity.value, affinity)


def teacher_forward(reps, P, cfg):
    """Encoder followed by the affinity head; returns (FitnessOutput, encoded reps)."""
    enc = pair_encoder(reps, P, cfg)
    return affinity_head(enc, P, cfg), enc


def trunk_embedding(enc):
    """Mean single representation over unmasked tokens, ``(B, d_single)``."""
    m = enc.single_mask.astype(np.float64)
    s = _value(enc.s)
    return (s * m[..., None]).sum(axis=1) / np.maximum(m.sum(axis=1), 1.0)[:, None]
