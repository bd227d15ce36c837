"""Synthetic worlds, training loops and reproducible desk-scale experiments."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .chem import parse_smiles
from .fingerprint import ecfp_batch, fingerprint_matrix
from .losses import DistillPair, RankingGroup, SftBatch, distill_loss, dpo_loss, plackett_luce_prob, sft_loss
from .model import (
    StudentConfig,
    TeacherConfig,
    TeacherFeaturizer,
    as_vars,
    init_student_params,
    init_teacher_params,
    student_forward,
    teacher_forward,
)
from .model import autodiff as ad

logger = logging.getLogger(__name__)

STAGE1_LR = 1.8e-3
STAGE2_LR = 2.0e-4


class DivergenceDetected(FloatingPointError):
    pass


# --- template grammar ---------------------------------------------------------------
# Ring templates: {L}/{M} are ring-closure labels, {a}/{b} optional substituent
# slots. The first atom is the attachment point to the parent fragment.

RINGS = (
    "c{L}cc{a}cc{b}c{L}",
    "c{L}ccc{a}cc{L}",
    "c{L}cc{a}nc{b}c{L}",
    "c{L}ncc{a}cn{L}",
    "c{L}cc{a}sc{L}",
    "c{L}cc{a}oc{L}",
    "c{L}cc{a}[nH]c{L}",
    "C{L}CC{a}CC{b}C{L}",
    "C{L}CC{a}CC{L}",
    "N{L}CCN{a}CC{L}",
    "N{L}CCOCC{L}",
    "C{L}CC{a}CNC{L}",
    "c{L}ccc{M}cc{a}ccc{M}c{L}",
    "c{L}ccc{M}[nH]cc{a}c{M}c{L}",
    "c{L}nc{a}c{M}ccccc{M}n{L}",
)
LINKERS = ("", "C", "CC", "O", "N", "S", "C(=O)N", "NC(=O)", "C(=O)", "OC", "CO", "CN",
           "NC(=O)N", "S(=O)(=O)N", "C=C", "C#C", "CC(C)")
TERMINALS = ("C", "CC", "F", "Cl", "Br", "O", "OC", "N", "C(F)(F)F", "C#N", "C(=O)O", "C(=O)N",
             "N(C)C", "CC(C)C", "OCC", "S(C)(=O)=O", "C(C)(C)C", "[N+](=O)[O-]")


class _Writer:
    def __init__(self, rng, max_rings):
        self.rng = rng
        self.next_label = 1
        self.rings_left = max_rings

    def _label(self):
        k = self.next_label
        self.next_label += 1
        return str(k) if k < 10 else f"%{k}"

    def _pick(self, options):
        return options[int(self.rng.integers(len(options)))]

    def ring(self, depth):
        self.rings_left -= 1
        tpl = self._pick(RINGS)
        labels = {"L": self._label()}
        if "{M}" in tpl:
            labels["M"] = self._label()
        slots = {}
        for slot in ("a", "b"):
            if "{" + slot + "}" in tpl and self.rng.random() < 0.8:
                slots[slot] = "(" + self.substituent(depth + 1) + ")"
            else:
                slots[slot] = ""
        return tpl.format(**labels, **slots)

    def substituent(self, depth):
        if depth < 3 and self.rings_left > 0 and self.rng.random() < 0.55:
            return self._pick(LINKERS) + self.ring(depth)
        return self._pick(TERMINALS)


MIN_HEAVY_ATOMS = 10


def random_molecule_smiles(rng, max_rings=4):
    """One single-fragment SMILES from the template grammar (>= 10 heavy atoms)."""
    while True:
        w = _Writer(rng, max_rings)
        head = ""
        if rng.random() < 0.7:
            head = w._pick(TERMINALS[:8]) + w._pick(LINKERS)
        smi = head + w.ring(0)
        if len(parse_smiles(smi).heavy_indices) >= MIN_HEAVY_ATOMS:
            return smi


@dataclass
class SyntheticWorld:
    seed: int
    ids: list
    smiles: list
    fps: list
    planted_weights: np.ndarray
    noise: float
    planted_scores: np.ndarray
    labels: np.ndarray
    protein: np.ndarray

    def __len__(self):
        return len(self.ids)

    def fp_matrix(self):
        return fingerprint_matrix(self.fps) if self.fps else np.zeros((0, self.planted_weights.size), np.uint8)

    def actives(self, fraction=0.01):
        """Boolean mask of the top ``fraction`` by label (ties by id)."""
        n = len(self)
        k = max(1, int(round(fraction * n))) if n else 0
        order = sorted(range(n), key=lambda i: (-self.labels[i], self.ids[i]))
        mask = np.zeros(n, dtype=bool)
        mask[order[:k]] = True
        return mask


def generate_world(seed, size, noise=0.1, width=1024, planted_density=0.1, d_prot=32):
    """``size`` template molecules with planted linear labels over fingerprint bits.

    Labels are the planted score standardized over the world, plus Gaussian
    noise of standard deviation ``noise``.
    """
    rng = np.random.default_rng(seed)
    smiles = [random_molecule_smiles(rng) for _ in range(size)]
    mols = [parse_smiles(s) for s in smiles]
    fps = ecfp_batch(mols, 2, width)
    weights = np.where(rng.random(width) < planted_density, rng.normal(size=width), 0.0)
    protein = rng.normal(size=d_prot)
    ids = [f"SYN{seed:04d}-{i:07d}" for i in range(size)]
    if size:
        raw = fingerprint_matrix(fps).astype(np.float64) @ weights
        sd = raw.std()
        planted = (raw - raw.mean()) / (sd if sd > 0 else 1.0)
    else:
        planted = np.zeros(0)
    labels = planted + noise * rng.normal(size=size)
    return SyntheticWorld(seed, ids, smiles, fps, weights, noise, planted, labels, protein)


# --- optimizers -----------------------------------------------------------------------

class MomentumSGD:
    def __init__(self, lr, momentum=0.9, clip=10.0):
        self.lr, self.momentum, self.clip = lr, momentum, clip
        self.velocity = {}

    def step(self, params, grads):
        grads = _clip(grads, self.clip)
        for k, g in grads.items():
            v = self.momentum * self.velocity.get(k, 0.0) + g
            self.velocity[k] = v
            params[k] = params[k] - self.lr * v


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.95, eps=1e-8, clip=10.0):
        self.lr, self.b1, self.b2, self.eps, self.clip = lr, beta1, beta2, eps, clip
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params, grads):
        grads = _clip(grads, self.clip)
        self.t += 1
        for k, g in grads.items():
            m = self.b1 * self.m.get(k, 0.0) + (1 - self.b1) * g
            v = self.b2 * self.v.get(k, 0.0) + (1 - self.b2) * g * g
            self.m[k], self.v[k] = m, v
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            params[k] = params[k] - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _clip(grads, max_norm):
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm and total > max_norm:
        return {k: g * (max_norm / total) for k, g in grads.items()}
    return grads


def make_optimizer(name, lr):
    if name == "sgd":
        return MomentumSGD(lr)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {name!r}")


def _check_loss(value, epoch):
    if not np.isfinite(value):
        raise DivergenceDetected(f"non-finite loss at epoch {epoch}")


# --- student training -----------------------------------------------------------------

@dataclass
class StudentData:
    """Training rows for the student: features, labels and optional teacher targets."""

    fp: np.ndarray  # (n, W) 0/1
    prior: np.ndarray  # (n, D_prior)
    protein: np.ndarray  # (D_prot,)
    y: np.ndarray  # (n,)
    h_main: np.ndarray = None  # (n, D_prior) teacher trunk embeddings


@dataclass
class TrainResult:
    params: dict
    loss_curve: list
    extra: dict = field(default_factory=dict)


def student_batch_loss(P, data, idx, cfg, alpha, beta):
    """Mean distillation loss over ``idx`` and the seed gradients for backward."""
    fp = ad.Var(data.fp[idx].astype(np.float64))
    prot = ad.Var(np.broadcast_to(data.protein, (len(idx), data.protein.size)))
    prior = ad.Var(data.prior[idx])
    h_pred, y_pred = student_forward(fp, prot, prior, P, cfg)
    n = len(idx)
    gh = np.zeros_like(h_pred.value)
    gy = np.zeros(n)
    total = 0.0
    for r, i in enumerate(idx):
        h_main = data.h_main[i] if data.h_main is not None else h_pred.value[r]
        a = alpha if data.h_main is not None else 0.0
        loss, dh, dy = distill_loss(DistillPair(h_pred.value[r], h_main, y_pred.value[r],
                                                data.y[i], a, beta))
        total += loss / n
        gh[r] = dh / n
        gy[r] = dy / n
    return total, h_pred, y_pred, gh, gy


def train_student(data, cfg, epochs=30, lr=STAGE1_LR, seed=0, alpha=1.0, beta=1.0,
                  batch_size=64, optimizer="sgd", params=None):
    """Minimize the distillation loss; ``data.h_main is None`` means teacher-free mode."""
    rng = np.random.default_rng(seed)
    params = init_student_params(cfg, seed) if params is None else {k: v.copy() for k, v in params.items()}
    opt = make_optimizer(optimizer, lr)
    n = len(data.y)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            P = as_vars(params)
            loss, h_pred, y_pred, gh, gy = student_batch_loss(P, data, idx, cfg, alpha, beta)
            _check_loss(loss, epoch)
            root = ad.sum_(h_pred * gh) + ad.sum_(y_pred * gy)
            ad.backward(root)
            opt.step(params, ad.parameters_grads(P))
            total += loss * len(idx)
        curve.append(total / max(n, 1))
        _check_loss(curve[-1], epoch)
    return TrainResult(params, curve)


# --- teacher head training -------------------------------------------------------------

@dataclass
class HeadGroup:
    """Molecules of one ranking group with their preferred order (best first)."""

    mols: list
    true_order: tuple
    confidence: float = 1.0


def _group_scores(P, feat, groups, protein, cfg):
    mols = [m for g in groups for m in g.mols]
    reps = feat.batch(mols, protein)
    fit, _ = teacher_forward(reps, P, cfg)
    return fit


def mean_group_probability(params, groups, protein, cfg, tau=0.1, chunk=32):
    feat = TeacherFeaturizer(cfg, len(protein))
    P = as_vars(params)
    probs = []
    for start in range(0, len(groups), chunk):
        part = groups[start:start + chunk]
        aff = _group_scores(P, feat, part, protein, cfg).affinity
        pos = 0
        for g in part:
            k = len(g.mols)
            probs.append(plackett_luce_prob(RankingGroup(aff[pos:pos + k], g.true_order, tau)))
            pos += k
    return float(np.mean(probs)) if probs else 1.0


def train_head_dpo(groups, protein, cfg, epochs=20, lr=STAGE2_LR, tau=0.1, seed=0,
                   batch_groups=16, optimizer="sgd", params=None):
    """Preference training of encoder + head on ranking groups."""
    rng = np.random.default_rng(seed)
    params = init_teacher_params(cfg, seed) if params is None else {k: v.copy() for k, v in params.items()}
    opt = make_optimizer(optimizer, lr)
    feat = TeacherFeaturizer(cfg, len(protein))
    baseline = mean_group_probability(params, groups, protein, cfg, tau)
    curve = []
    trainable = [g for g in groups if len(g.mols) > 1]
    for epoch in range(epochs):
        if not trainable:
            curve.append(0.0)
            continue
        order = rng.permutation(len(trainable))
        total = 0.0
        for start in range(0, len(order), batch_groups):
            batch = [trainable[i] for i in order[start:start + batch_groups]]
            P = as_vars(params)
            fit = _group_scores(P, feat, batch, protein, cfg)
            rgs, pos = [], 0
            for g in batch:
                k = len(g.mols)
                rgs.append(RankingGroup(fit.affinity[pos:pos + k], g.true_order, tau, g.confidence))
                pos += k
            loss, grads = dpo_loss(rgs)
            _check_loss(loss, epoch)
            ad.backward(fit.affinity_var, seed=np.concatenate(grads))
            opt.step(params, ad.parameters_grads(P))
            total += loss * len(batch)
        # groups of one item contribute zero loss but still count in the mean
        curve.append(total / len(groups))
    final = mean_group_probability(params, groups, protein, cfg, tau)
    return TrainResult(params, curve, {"baseline_probability": baseline, "final_probability": final})


def train_head_sft(mols, y_true, protein, cfg, epochs=20, lr=STAGE1_LR, seed=0, batch_size=16,
                   lam=0.01, sigma=None, optimizer="sgd", params=None):
    """Supervised fitness training with the input-gradient penalty."""
    rng = np.random.default_rng(seed)
    params = init_teacher_params(cfg, seed) if params is None else {k: v.copy() for k, v in params.items()}
    opt = make_optimizer(optimizer, lr)
    feat = TeacherFeaturizer(cfg, len(protein))
    y_true = np.asarray(y_true, dtype=np.float64)
    sigma = np.ones_like(y_true) if sigma is None else np.asarray(sigma, dtype=np.float64)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(len(mols))
        total = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            reps = feat.batch([mols[i] for i in idx], protein)
            s_in, z_in = ad.Var(reps.s), ad.Var(reps.z)
            P = as_vars(params)
            fit, _ = teacher_forward(reps.with_features(s_in, z_in), P, cfg)
            # input-gradient norms from a first sweep (examples are independent)
            ad.backward(fit.affinity_var)
            norms = np.sqrt((s_in.grad ** 2).sum(axis=(1, 2)) + (z_in.grad ** 2).sum(axis=(1, 2, 3)))
            loss, g = sft_loss(SftBatch(fit.affinity, y_true[idx], sigma[idx], norms, lam))
            _check_loss(loss, epoch)
            P = as_vars(params)
            fit, _ = teacher_forward(reps, P, cfg)
            ad.backward(fit.affinity_var, seed=g)
            opt.step(params, ad.parameters_grads(P))
            total += loss * len(idx)
        curve.append(total / max(len(mols), 1))
    return TrainResult(params, curve)


# --- manifests and curves ----------------------------------------------------------------

def config_hash(config):
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode("utf-8")).hexdigest()


def write_loss_curve(path, curve):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(curve):
            w.writerow([i, repr(float(v))])


def write_manifest(path, seed, config, outputs):
    """Seed, config hash, versions and output digests for a harness run."""
    digests = {}
    for name, p in sorted(outputs.items()):
        with open(p, "rb") as fh:
            digests[name] = hashlib.sha256(fh.read()).hexdigest()
    doc = {
        "seed": seed,
        "config_hash": config_hash(config),
        "config": config,
        "versions": {"aurascreen": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "outputs": digests,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return doc


# --- end-to-end enrichment experiment --------------------------------------------------

@dataclass
class EnrichmentConfig:
    seed: int = 0
    library_size: int = 100_000
    train_size: int = 5_000
    active_fraction: float = 0.01
    noise: float = 0.1
    cluster_threshold: float = 0.6
    compounds_per_center: int = 1_000
    max_cluster_size: int = 5_000
    epochs: int = 40
    lr: float = STAGE1_LR
    batch_size: int = 64
    alpha: float = 1.0
    beta: float = 1.0
    optimizer: str = "sgd"
    teacher_free: bool = False
    teacher: dict = field(default_factory=dict)
    student: dict = field(default_factory=dict)


def run_enrichment_experiment(config=None, out_dir=None):
    """Train the student on a labeled slice of a synthetic world and screen the rest.

    Returns a dict with EF1%, AUPR, the positive base rate and timings.
    """
    from .metrics import aupr, auroc, enrichment_factor
    from .scoring import build_library_index, parse_library, student_inputs, student_scores, teacher_embeddings

    cfg = config or EnrichmentConfig()
    timings = {}
    t0 = time.perf_counter()
    world = generate_world(cfg.seed, cfg.library_size, cfg.noise)
    timings["generate"] = time.perf_counter() - t0
    active = world.actives(cfg.active_fraction)
    tcfg = TeacherConfig(**cfg.teacher)
    scfg = StudentConfig(**{"d_prot": world.protein.size, "d_prior": tcfg.d_single, **cfg.student})
    tparams = init_teacher_params(tcfg, cfg.seed)

    t = time.perf_counter()
    lib = parse_library(zip(world.ids, world.smiles))
    index, _ = build_library_index(lib, world.protein, tparams, tcfg, cfg.cluster_threshold,
                                   cfg.compounds_per_center, cfg.max_cluster_size, cfg.seed)
    timings["prior_index"] = time.perf_counter() - t

    rng = np.random.default_rng(cfg.seed + 1)
    perm = rng.permutation(len(world))
    train_idx = np.sort(perm[:cfg.train_size])
    test_idx = np.sort(perm[cfg.train_size:])
    fpm = world.fp_matrix()

    t = time.perf_counter()
    inp = student_inputs(fpm[train_idx], world.protein, index)
    h_main = None
    if not cfg.teacher_free:
        h_main = teacher_embeddings([lib.mols[i] for i in train_idx], world.protein, tparams, tcfg)
    data = StudentData(fpm[train_idx], inp.prior, world.protein, world.labels[train_idx], h_main)
    timings["teacher_targets"] = time.perf_counter() - t

    t = time.perf_counter()
    result = train_student(data, scfg, cfg.epochs, cfg.lr, cfg.seed, cfg.alpha, cfg.beta,
                           cfg.batch_size, cfg.optimizer)
    timings["train"] = time.perf_counter() - t

    t = time.perf_counter()
    scores = student_scores(fpm[test_idx], world.protein, result.params, scfg, index)
    timings["score_heldout"] = time.perf_counter() - t
    labels = active[test_idx]
    metrics = {
        "ef1": enrichment_factor(scores, labels, 0.01),
        "aupr": aupr(scores, labels),
        "auroc": auroc(scores, labels),
        "base_rate": float(labels.mean()),
        "train_mse": float(np.mean((student_scores(fpm[train_idx], world.protein, result.params,
                                                   scfg, index) - data.y) ** 2)),
    }
    timings["total"] = time.perf_counter() - t0
    summary = {"config": asdict(cfg), "metrics": metrics, "loss_curve": result.loss_curve,
               "timings": timings}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        curve = os.path.join(out_dir, "loss_curve.csv")
        write_loss_curve(curve, result.loss_curve)
        res = os.path.join(out_dir, "metrics.json")
        with open(res, "w", encoding="utf-8") as fh:
            json.dump(metrics, fh, indent=1, sort_keys=True)
            fh.write("\n")
        write_manifest(os.path.join(out_dir, "manifest.json"), cfg.seed, asdict(cfg),
                       {"loss_curve.csv": curve, "metrics.json": res})
    return summary


# --- config-driven training runs (used by the CLI) ----------------------------------------

class TrainingConfigError(ValueError):
    pass


def _resolve(path, base_dir):
    if path and base_dir and not os.path.isabs(path):
        return os.path.join(base_dir, path)
    return path


def load_training_set(config, base_dir=None):
    """``(ids, smiles, mols, y, protein, records)`` from a synthetic world or activity table.

    Activity mode reads ``library_path``, ``activities_path`` (restricted to
    ``target_id``) and ``protein_embedding_path``; records are curated and
    duplicate compounds are averaged.
    """
    from .chem import read_library
    from .model import read_protein_embedding
    from .sampler import curate, read_activity_csv

    if "world" in config:
        w = config["world"]
        world = generate_world(w.get("seed", 0), w.get("size", 1000), w.get("noise", 0.1))
        mols = [parse_smiles(s) for s in world.smiles]
        return world.ids, world.smiles, mols, world.labels, world.protein, None
    for key in ("library_path", "activities_path", "protein_embedding_path", "target_id"):
        if key not in config:
            raise TrainingConfigError(f"missing {key!r} (or a 'world' section)")
    library = dict(read_library(_resolve(config["library_path"], base_dir)))
    records = [r for r in read_activity_csv(_resolve(config["activities_path"], base_dir))
               if r.target_id == config["target_id"]]
    records = curate(records, seed=config.get("seed", 0))
    protein = read_protein_embedding(_resolve(config["protein_embedding_path"], base_dir))
    by_compound = {}
    for r in records:
        if r.compound_id in library:
            by_compound.setdefault(r.compound_id, []).append(r.potency)
    ids = sorted(by_compound)
    if not ids:
        raise TrainingConfigError("no curated activity records match library compounds")
    smiles = [library[c] for c in ids]
    mols = [parse_smiles(s) for s in smiles]
    y = np.array([np.mean(by_compound[c]) for c in ids])
    return ids, smiles, mols, y, protein, records


def _outputs(out_dir, result, ckpt_name, config, extra_files=None):
    from .model import save_checkpoint
    os.makedirs(out_dir, exist_ok=True)
    ckpt = os.path.join(out_dir, ckpt_name)
    save_checkpoint(ckpt, result.params)
    curve = os.path.join(out_dir, "loss_curve.csv")
    write_loss_curve(curve, result.loss_curve)
    files = {ckpt_name: ckpt, "loss_curve.csv": curve, **(extra_files or {})}
    write_manifest(os.path.join(out_dir, "manifest.json"), config.get("seed", 0), config, files)
    return files


def run_train_student(config, out_dir, base_dir=None):
    """Student training run: prior index, teacher targets, distillation, checkpoint."""
    from .model import load_checkpoint
    from .cluster import write_prior_index
    from .scoring import build_library_index, parse_library, student_inputs, teacher_embeddings

    seed = config.get("seed", 0)
    ids, smiles, mols, y, protein, _ = load_training_set(config, base_dir)
    tcfg = TeacherConfig(**config.get("teacher", {}))
    scfg = StudentConfig(**{"d_prot": protein.size, "d_prior": tcfg.d_single, **config.get("student", {})})
    tpath = _resolve(config.get("teacher_checkpoint"), base_dir)
    tparams = load_checkpoint(tpath) if tpath else init_teacher_params(tcfg, seed)
    lib = parse_library(zip(ids, smiles))
    if len(lib.ids) != len(ids):
        raise TrainingConfigError(f"{len(ids) - len(lib.ids)} training compounds failed to parse")
    index, _ = build_library_index(lib, protein, tparams, tcfg,
                                   config.get("cluster_threshold", 0.6),
                                   config.get("compounds_per_center", 1000),
                                   config.get("max_cluster_size", 5000), seed)
    fpm = lib.fp_matrix()
    inp = student_inputs(fpm, protein, index)
    teacher_free = config.get("teacher_free", False)
    h_main = None if teacher_free else teacher_embeddings(lib.mols, protein, tparams, tcfg)
    data = StudentData(fpm, inp.prior, protein, np.asarray(y, dtype=np.float64), h_main)
    result = train_student(data, scfg, config.get("epochs", 30), config.get("lr", STAGE1_LR), seed,
                           config.get("alpha", 1.0), config.get("beta", 1.0),
                           config.get("batch_size", 64), config.get("optimizer", "sgd"))
    prior_path = os.path.join(out_dir, "prior_index.tsv")
    os.makedirs(out_dir, exist_ok=True)
    write_prior_index(prior_path, index)
    return result, _outputs(out_dir, result, "student.auro", config, {"prior_index.tsv": prior_path})


def run_train_head(config, out_dir, base_dir=None):
    """Teacher head training run with the ``dpo`` (default) or ``sft`` objective."""
    from .model import load_checkpoint
    from .sampler import ActivityRecord, build_dpo_groups

    seed = config.get("seed", 0)
    ids, smiles, mols, y, protein, records = load_training_set(config, base_dir)
    tcfg = TeacherConfig(**config.get("teacher", {}))
    tpath = _resolve(config.get("teacher_checkpoint"), base_dir)
    params = load_checkpoint(tpath) if tpath else None
    objective = config.get("objective", "dpo")
    epochs = config.get("epochs", 20)
    optimizer = config.get("optimizer", "sgd")
    if objective == "sft":
        result = train_head_sft(mols, y, protein, tcfg, epochs, config.get("lr", STAGE1_LR), seed,
                                config.get("batch_size", 16), config.get("lambda", 0.01),
                                optimizer=optimizer, params=params)
    elif objective == "dpo":
        pos = {c: k for k, c in enumerate(ids)}
        recs = [ActivityRecord("target", c, float(v)) for c, v in zip(ids, y)]
        groups = build_dpo_groups(recs, config.get("group_size", 2), config.get("window", 1.0))
        head_groups = [HeadGroup([mols[pos[r.compound_id]] for r in g.records], g.true_order)
                       for g in groups]
        if not head_groups:
            raise TrainingConfigError("no ranking groups could be formed")
        result = train_head_dpo(head_groups, protein, tcfg, epochs, config.get("lr", STAGE2_LR),
                                config.get("tau", 0.1), seed, config.get("batch_groups", 16),
                                optimizer, params)
    else:
        raise TrainingConfigError(f"unknown objective {objective!r}")
    return result, _outputs(out_dir, result, "teacher.auro", config)
