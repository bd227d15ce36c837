"""Two-stage screening campaign with the property and novelty filter cascade.

Order of operations: parse -> fingerprints -> prior index -> stage 1
(student) -> stage 2 (teacher) -> property filter -> novelty filter ->
optional allowlist -> shortlist. Reports contain no timings or worker
counts, so reruns and different worker counts give identical bytes;
timings go to a separate sidecar file.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .chem import SmilesError, compute_descriptors, parse_smiles, read_library
from .cluster import DEFAULT_COMPOUNDS_PER_CENTER, DEFAULT_MAX_CLUSTER_SIZE, DEFAULT_THRESHOLD
from .fingerprint import WidthMismatch, ecfp, fingerprint_matrix, tanimoto_matrix
from .model import (
    ShapeMismatch,
    StudentConfig,
    TeacherConfig,
    init_student_params,
    init_teacher_params,
    load_checkpoint,
    read_protein_embedding,
)
from .model.params import check_shapes
from .scoring import build_library_index, parse_library, rank, student_scores, teacher_scores

logger = logging.getLogger(__name__)

HIST_BINS = 40


class ConfigInvalid(ValueError):
    pass


class CampaignIoError(OSError):
    pass


@dataclass(frozen=True)
class FilterThresholds:
    mw_min: float = 200.0
    clogp_max: float = 6.0
    hbd_max: int = 4
    hba_max: int = 10
    esol_min: float = -9.0
    novelty_cutoff: float = 0.6


@dataclass
class CampaignConfig:
    target_id: str
    protein_embedding_path: str
    library_path: str
    known_actives_path: str = None
    allowlist_path: str = None
    student_checkpoint: str = None
    teacher_checkpoint: str = None
    output_dir: str = None
    stage1_keep: int = 10000
    stage2_keep: int = 500
    shortlist_size: int = 50
    mw_min: float = 200.0
    clogp_max: float = 6.0
    hbd_max: int = 4
    hba_max: int = 10
    esol_min: float = -9.0
    novelty_cutoff: float = 0.6
    cluster_threshold: float = DEFAULT_THRESHOLD
    compounds_per_center: int = DEFAULT_COMPOUNDS_PER_CENTER
    max_cluster_size: int = DEFAULT_MAX_CLUSTER_SIZE
    seed: int = 0
    worker_count: int = 1
    teacher: dict = field(default_factory=dict)
    student: dict = field(default_factory=dict)

    # fields that may change without changing the report
    NON_SEMANTIC = ("worker_count", "output_dir")

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.stage1_keep >= self.stage2_keep >= self.shortlist_size >= 1:
            raise ConfigInvalid("need stage1_keep >= stage2_keep >= shortlist_size >= 1")
        for name in ("mw_min", "clogp_max", "hbd_max", "hba_max", "esol_min", "novelty_cutoff",
                     "cluster_threshold"):
            if not math.isfinite(float(getattr(self, name))):
                raise ConfigInvalid(f"{name} must be finite")
        if self.worker_count < 1:
            raise ConfigInvalid("worker_count must be >= 1")
        if not 0 < self.cluster_threshold <= 1:
            raise ConfigInvalid("cluster_threshold must lie in (0, 1]")
        try:
            TeacherConfig(**self.teacher)
            StudentConfig(**self.student)
        except TypeError as exc:
            raise ConfigInvalid(f"bad model configuration: {exc}") from None

    @property
    def thresholds(self):
        return FilterThresholds(self.mw_min, self.clogp_max, self.hbd_max, self.hba_max,
                                self.esol_min, self.novelty_cutoff)

    @classmethod
    def from_dict(cls, data, base_dir=None):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigInvalid(f"unknown config fields: {', '.join(unknown)}")
        for req in ("target_id", "protein_embedding_path", "library_path"):
            if req not in data:
                raise ConfigInvalid(f"missing required field {req!r}")
        data = dict(data)
        if base_dir:
            for key in ("protein_embedding_path", "library_path", "known_actives_path",
                        "allowlist_path", "student_checkpoint", "teacher_checkpoint", "output_dir"):
                if data.get(key) and not os.path.isabs(data[key]):
                    data[key] = os.path.join(base_dir, data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: {exc}") from None
        except OSError as exc:
            raise CampaignIoError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalid(f"{path}: expected a JSON object")
        return cls.from_dict(data, os.path.dirname(os.path.abspath(path)))

    def config_hash(self):
        """SHA-256 over the semantic fields plus the contents of every input file."""
        h = hashlib.sha256()
        d = {k: v for k, v in asdict(self).items() if k not in self.NON_SEMANTIC}
        for key in ("protein_embedding_path", "library_path", "known_actives_path",
                    "allowlist_path", "student_checkpoint", "teacher_checkpoint"):
            path = d.pop(key)
            d[key] = None if path is None else _file_digest(path)
        h.update(json.dumps(d, sort_keys=True).encode("utf-8"))
        return h.hexdigest()


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# --- filters -------------------------------------------------------------------

@dataclass
class FilterVerdict:
    passed: bool
    reasons: list
    descriptors: dict = None


def property_filter(mol, thresholds=FilterThresholds()):
    """Check every rule; failures carry one named reason per violated rule."""
    reasons = []
    if not mol.valid:
        reasons.append("valence")
    if mol.fragment_count > 1:
        reasons.append("multi_fragment")
    if not mol.valid:
        return FilterVerdict(False, reasons, None)
    d = compute_descriptors(mol)
    if d.mw < thresholds.mw_min:
        reasons.append("mw_below_min")
    if d.clogp > thresholds.clogp_max:
        reasons.append("clogp_above_max")
    if d.hbd > thresholds.hbd_max:
        reasons.append("hbd_above_max")
    if d.hba > thresholds.hba_max:
        reasons.append("hba_above_max")
    if d.esol < thresholds.esol_min:
        reasons.append("esol_below_min")
    return FilterVerdict(not reasons, reasons, d.as_dict())


def recheck_reasons(descriptors, thresholds, fragment_count=1, valid=True):
    """Reasons implied by stored descriptors; used to audit a verdict."""
    reasons = []
    if not valid:
        return ["valence"] + (["multi_fragment"] if fragment_count > 1 else [])
    if fragment_count > 1:
        reasons.append("multi_fragment")
    checks = (("mw_below_min", descriptors["mw"] < thresholds.mw_min),
              ("clogp_above_max", descriptors["clogp"] > thresholds.clogp_max),
              ("hbd_above_max", descriptors["hbd"] > thresholds.hbd_max),
              ("hba_above_max", descriptors["hba"] > thresholds.hba_max),
              ("esol_below_min", descriptors["esol"] < thresholds.esol_min))
    return reasons + [name for name, bad in checks if bad]


@dataclass
class NoveltyVerdict:
    keep: bool
    nearest_id: str
    similarity: float


class KnownActives:
    """Known actives sorted by id, with a dense matrix for similarity search."""

    def __init__(self, items):
        items = sorted(items, key=lambda x: x[0])
        self.ids = [cid for cid, _ in items]
        self.fps = [fp for _, fp in items]
        self.matrix = fingerprint_matrix(self.fps) if items else None

    def __len__(self):
        return len(self.ids)


def novelty_filter(fp, known, cutoff=0.6):
    """Reject iff the nearest known active is strictly more similar than ``cutoff``."""
    if not isinstance(known, KnownActives):
        known = KnownActives(known)
    if not len(known):
        return NoveltyVerdict(True, None, 0.0)
    if known.matrix.shape[1] != fp.width:
        raise WidthMismatch("known actives use a different fingerprint width")
    sim = tanimoto_matrix(fingerprint_matrix([fp]), known.matrix)[0]
    k = int(np.argmax(sim))  # first maximum = smallest id
    return NoveltyVerdict(bool(sim[k] <= cutoff), known.ids[k], float(sim[k]))


# --- stages ---------------------------------------------------------------------

@dataclass
class Ranked:
    ids: list
    scores: list

    def entries(self):
        return [{"id": cid, "score": s, "rank": r + 1}
                for r, (cid, s) in enumerate(zip(self.ids, self.scores))]


def stage1_triage(lib, protein, student_params, student_cfg, index, keep, workers=1):
    """Score every parsed compound with the student; keep the top ``keep``."""
    if not lib.ids:
        raise ConfigInvalid("library has no parseable compounds")
    scores = student_scores(lib.fp_matrix(), protein, student_params, student_cfg, index, workers)
    order = rank(lib.ids, scores)[:keep]
    return Ranked([lib.ids[i] for i in order], [float(scores[i]) for i in order]), scores


def stage2_rescore(ids, mols, protein, teacher_params, teacher_cfg, keep):
    """Rescore candidates with the teacher; keep the top ``keep`` (same tie rule)."""
    if not ids:
        raise ValueError("no candidates to rescore")
    scores = teacher_scores(mols, protein, teacher_params, teacher_cfg)
    order = rank(ids, scores)[:keep]
    return Ranked([ids[i] for i in order], [float(scores[i]) for i in order]), scores


# --- campaign ---------------------------------------------------------------------

@dataclass
class ScreenReport:
    metadata: dict
    stage1: Ranked
    stage2: Ranked
    verdicts: dict  # id -> dict
    shortlist: list  # list of row dicts
    distributions: dict  # stage -> list of scores
    timings: dict = field(default_factory=dict)

    def to_json(self):
        doc = {
            "metadata": self.metadata,
            "stage1": self.stage1.entries(),
            "stage2": self.stage2.entries(),
            "filters": [{"id": cid, **v} for cid, v in self.verdicts.items()],
            "shortlist": self.shortlist,
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def shortlist_csv(self):
        cols = ["id", "smiles", "stage1_score", "stage2_score", "mw", "clogp", "hbd", "hba",
                "rotatable_bonds", "rings", "esol", "nearest_active", "nearest_active_similarity"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.shortlist:
            flat = {**row, **row["descriptors"]}
            w.writerow(["" if flat.get(c) is None else flat[c] for c in cols])
        return buf.getvalue()

    def distribution_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "bin_low", "bin_high", "count"])
        for stage in sorted(self.distributions):
            values = np.asarray(self.distributions[stage], dtype=np.float64)
            if values.size == 0:
                continue
            lo, hi = float(values.min()), float(values.max())
            if hi == lo:
                hi = lo + 1.0
            counts, edges = np.histogram(values, bins=HIST_BINS, range=(lo, hi))
            for c, a, b in zip(counts, edges[:-1], edges[1:]):
                w.writerow([stage, repr(float(a)), repr(float(b)), int(c)])
        return buf.getvalue()

    def write(self, out_dir):
        """Write report.json, shortlist.csv, score_distribution.csv and timings.json."""
        os.makedirs(out_dir, exist_ok=True)
        files = {"report.json": self.to_json(), "shortlist.csv": self.shortlist_csv(),
                 "score_distribution.csv": self.distribution_csv(),
                 "timings.json": json.dumps(self.timings, indent=1, sort_keys=True) + "\n"}
        for name, text in files.items():
            tmp = os.path.join(out_dir, name + ".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, os.path.join(out_dir, name))
        return {name: os.path.join(out_dir, name) for name in files}


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]


def load_models(config, d_prot):
    """Teacher and student parameters: from checkpoints when given, else seeded init."""
    tcfg = TeacherConfig(**config.teacher)
    scfg = StudentConfig(**{"d_prot": d_prot, "d_prior": tcfg.d_single, **config.student})
    if scfg.d_prot != d_prot:
        raise ConfigInvalid(f"student d_prot {scfg.d_prot} != protein embedding dim {d_prot}")
    if scfg.d_prior != tcfg.d_single:
        raise ConfigInvalid("student d_prior must equal teacher d_single")
    tparams = load_checkpoint(config.teacher_checkpoint) if config.teacher_checkpoint \
        else init_teacher_params(tcfg, config.seed)
    sparams = load_checkpoint(config.student_checkpoint) if config.student_checkpoint \
        else init_student_params(scfg, config.seed)
    try:
        check_shapes(tparams, init_teacher_params(tcfg, 0))
        check_shapes(sparams, init_student_params(scfg, 0))
    except ShapeMismatch as exc:
        raise ConfigInvalid(f"checkpoint does not match the model configuration: {exc}") from None
    return tcfg, tparams, scfg, sparams


def run_campaign(config):
    """Run the full cascade and return a ScreenReport (nothing is written)."""
    if isinstance(config, dict):
        config = CampaignConfig.from_dict(config)
    config.validate()
    timings = {}
    t0 = time.perf_counter()
    try:
        protein = read_protein_embedding(config.protein_embedding_path)
        records = read_library(config.library_path)
        known_records = read_library(config.known_actives_path) if config.known_actives_path else []
        allow = set(_read_lines(config.allowlist_path)) if config.allowlist_path else None
        tcfg, tparams, scfg, sparams = load_models(config, protein.size)
        chash = config.config_hash()
    except OSError as exc:
        raise CampaignIoError(str(exc)) from exc
    workers = config.worker_count

    lib = parse_library(records, workers=workers)
    known = KnownActives([(cid, fp) for cid, fp in zip(*_known_fps(known_records))])
    timings["parse_and_fingerprint"] = time.perf_counter() - t0

    t = time.perf_counter()
    index, clusters = build_library_index(
        lib, protein, tparams, tcfg, config.cluster_threshold, config.compounds_per_center,
        config.max_cluster_size, config.seed)
    timings["prior_index"] = time.perf_counter() - t

    t = time.perf_counter()
    stage1, all_scores = stage1_triage(lib, protein, sparams, scfg, index, config.stage1_keep, workers)
    timings["stage1"] = time.perf_counter() - t

    pos = {cid: k for k, cid in enumerate(lib.ids)}
    t = time.perf_counter()
    stage2, _ = stage2_rescore(stage1.ids, [lib.mols[pos[c]] for c in stage1.ids], protein,
                               tparams, tcfg, config.stage2_keep)
    timings["stage2"] = time.perf_counter() - t

    t = time.perf_counter()
    s1 = dict(zip(stage1.ids, stage1.scores))
    verdicts, shortlist = {}, []
    th = config.thresholds
    for cid, score in zip(stage2.ids, stage2.scores):
        k = pos[cid]
        pv = property_filter(lib.mols[k], th)
        reasons = list(pv.reasons)
        nv = novelty_filter(lib.fps[k], known, th.novelty_cutoff) if pv.passed else None
        if nv is not None and not nv.keep:
            reasons.append("novelty")
        if not reasons and allow is not None and cid not in allow:
            reasons.append("not_in_allowlist")
        verdicts[cid] = {
            "passed": not reasons, "reasons": reasons, "descriptors": pv.descriptors,
            "fragment_count": lib.mols[k].fragment_count,
            "nearest_active": nv.nearest_id if nv else None,
            "nearest_active_similarity": nv.similarity if nv else None,
        }
        if not reasons and len(shortlist) < config.shortlist_size:
            shortlist.append({
                "id": cid, "smiles": lib.smiles[k], "stage1_score": s1[cid], "stage2_score": score,
                "descriptors": pv.descriptors, "nearest_active": nv.nearest_id,
                "nearest_active_similarity": nv.similarity,
            })
    timings["filters"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t0

    metadata = {
        "target_id": config.target_id,
        "config_hash": chash,
        "seed": config.seed,
        "version": __version__,
        "library_size": len(records),
        "parsed": len(lib.ids),
        "unparseable": [{"id": cid, "reason": r} for cid, r in lib.rejected],
        "known_actives": len(known),
        "clusters": len(clusters),
        "prior_centroids": list(index.ids),
        "stage1_keep": config.stage1_keep,
        "stage2_keep": config.stage2_keep,
        "shortlist_size": config.shortlist_size,
        "thresholds": asdict(th),
    }
    return ScreenReport(metadata, stage1, stage2, verdicts, shortlist,
                        {"stage1": all_scores.tolist(), "stage2": stage2.scores}, timings)


def _known_fps(known_records):
    ids, fps = [], []
    for cid, smi in known_records:
        try:
            mol = parse_smiles(smi)
        except SmilesError:
            logger.warning("known active %s does not parse; ignored", cid)
            continue
        if not mol.valid:
            logger.warning("known active %s fails valence; ignored", cid)
            continue
        ids.append(cid)
        fps.append(ecfp(mol))
    return ids, fps
