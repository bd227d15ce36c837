"""Batch scoring shared by the screening pipeline and the training harness.

Work is cut into fixed-size chunks that depend only on the input order, so
results are bit-identical whatever the number of worker processes.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chem import SmilesError, parse_smiles
from .cluster import (
    DEFAULT_COMPOUNDS_PER_CENTER,
    DEFAULT_MAX_CLUSTER_SIZE,
    DEFAULT_THRESHOLD,
    CentroidIndex,
    cluster_library,
    nearest_centroids,
    prior_budget,
    select_centroids,
)
from .fingerprint import ecfp_batch, fingerprint_matrix
from .model import StudentInput, TeacherFeaturizer, as_vars, aurofast_forward, teacher_forward
from .model.teacher import pair_encoder, trunk_embedding

logger = logging.getLogger(__name__)

STUDENT_CHUNK = 2048
TEACHER_CHUNK = 32


@dataclass
class ParsedLibrary:
    ids: list
    smiles: list
    mols: list
    fps: list
    rejected: list  # [(id, reason)]

    def fp_matrix(self):
        return fingerprint_matrix(self.fps)


def _parse_chunk(records, radius, width):
    ok, rejected = [], []
    for cid, smi in records:
        try:
            mol = parse_smiles(smi)
        except SmilesError as exc:
            rejected.append((cid, f"parse: {type(exc).__name__}"))
            continue
        if not mol.valid:
            rejected.append((cid, "valence"))
            continue
        ok.append((cid, smi, mol))
    fps = ecfp_batch([m for _, _, m in ok], radius, width)
    return ok, fps, rejected


def run_chunks(fn, chunks, workers, initializer=None, initargs=()):
    """``[fn(c) for c in chunks]``, optionally over a process pool, in chunk order."""
    if workers <= 1 or len(chunks) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(c) for c in chunks]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                             initializer=initializer, initargs=initargs) as pool:
        return list(pool.map(fn, chunks))


def _parse_task(args):
    records, radius, width = args
    return _parse_chunk(records, radius, width)


def parse_library(records, radius=2, width=1024, workers=1, chunk=STUDENT_CHUNK):
    """Parse ``[(id, smiles)]`` and fingerprint every valid molecule."""
    records = list(records)
    chunks = [(records[i:i + chunk], radius, width) for i in range(0, len(records), chunk)]
    lib = ParsedLibrary([], [], [], [], [])
    for ok, fps, rejected in run_chunks(_parse_task, chunks, workers):
        for (cid, smi, mol), fp in zip(ok, fps):
            lib.ids.append(cid)
            lib.smiles.append(smi)
            lib.mols.append(mol)
            lib.fps.append(fp)
        lib.rejected.extend(rejected)
    for cid, reason in lib.rejected:
        logger.info("skipping %s (%s)", cid, reason)
    return lib


# --- teacher -------------------------------------------------------------------

def _size_chunks(mols, chunk):
    """Index chunks grouped by token count (ties by position) to limit padding."""
    order = sorted(range(len(mols)), key=lambda i: (len(mols[i].heavy_indices), i))
    return [order[i:i + chunk] for i in range(0, len(order), chunk)]


def teacher_scores(mols, protein, params, cfg, chunk=TEACHER_CHUNK):
    """Teacher affinity per molecule (encoder + affinity head)."""
    feat = TeacherFeaturizer(cfg, len(protein))
    P = as_vars(params)
    out = np.zeros(len(mols))
    for idx in _size_chunks(mols, chunk):
        reps = feat.batch([mols[i] for i in idx], protein)
        fit, _ = teacher_forward(reps, P, cfg)
        out[idx] = fit.affinity
    return out


def teacher_embeddings(mols, protein, params, cfg, chunk=TEACHER_CHUNK):
    """Trunk embeddings ``(n, d_single)``: mean encoded single representation."""
    feat = TeacherFeaturizer(cfg, len(protein))
    P = as_vars(params)
    out = np.zeros((len(mols), cfg.d_single))
    for idx in _size_chunks(mols, chunk):
        enc = pair_encoder(feat.batch([mols[i] for i in idx], protein), P, cfg)
        out[idx] = trunk_embedding(enc)
    return out


def build_library_index(lib, protein, teacher_params, teacher_cfg, threshold=DEFAULT_THRESHOLD,
                        compounds_per_center=DEFAULT_COMPOUNDS_PER_CENTER,
                        max_cluster_size=DEFAULT_MAX_CLUSTER_SIZE, seed=0):
    """Cluster the library and embed the budgeted centroids with the teacher."""
    fps = dict(zip(lib.ids, lib.fps))
    clusters = cluster_library(fps, threshold, max_cluster_size, seed)
    budget = prior_budget(len(lib.ids), compounds_per_center)
    chosen = select_centroids(clusters, budget)
    pos = {cid: k for k, cid in enumerate(lib.ids)}
    mols = [lib.mols[pos[c.centroid_id]] for c in chosen]
    emb = teacher_embeddings(mols, protein, teacher_params, teacher_cfg)
    index = CentroidIndex([c.centroid_id for c in chosen], [fps[c.centroid_id] for c in chosen],
                          emb, budget)
    return index, clusters


# --- student -------------------------------------------------------------------

def student_inputs(fp_matrix, protein, index):
    """StudentInput rows: fingerprint bits, protein embedding and nearest-centroid prior."""
    nearest = nearest_centroids(fp_matrix, index)
    return StudentInput(fp_matrix.astype(np.float64), protein, index.embeddings[nearest])


_STATE = {}


def _student_init(params, cfg, protein, index):
    _STATE.update(params=params, cfg=cfg, protein=protein, index=index)


def _student_task(fp_rows):
    inp = student_inputs(fp_rows, _STATE["protein"], _STATE["index"])
    _, y = aurofast_forward(inp, _STATE["params"], _STATE["cfg"])
    return y


def student_scores(fp_matrix, protein, params, cfg, index, workers=1, chunk=STUDENT_CHUNK):
    """Student fitness for every fingerprint row."""
    if fp_matrix.shape[0] == 0:
        return np.zeros(0)
    chunks = [fp_matrix[i:i + chunk] for i in range(0, fp_matrix.shape[0], chunk)]
    parts = run_chunks(_student_task, chunks, workers, _student_init, (params, cfg, protein, index))
    return np.concatenate(parts)


def rank(ids, scores):
    """Indices ordered by (score descending, id ascending)."""
    return sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
