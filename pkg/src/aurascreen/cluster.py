"""Taylor-Butina clustering and the centroid prior index.

Compound ids are processed in sorted order so that every tie rule
("smallest id wins") reduces to "smallest index wins" and the result does
not depend on input order or on how the similarity work is chunked.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .fingerprint import Fingerprint, WidthMismatch, fingerprint_matrix, tanimoto_matrix

DEFAULT_THRESHOLD = 0.6
DEFAULT_COMPOUNDS_PER_CENTER = 100_000
DEFAULT_MAX_CLUSTER_SIZE = 200_000
CHUNK_ROWS = 1024


class EmptyLibrary(ValueError):
    pass


class MissingEmbedding(KeyError):
    def __init__(self, centroid_id):
        super().__init__(centroid_id)
        self.centroid_id = centroid_id


class EmptyIndex(ValueError):
    pass


@dataclass(frozen=True)
class Cluster:
    member_ids: tuple
    centroid_id: str
    seed_id: str


@dataclass
class CentroidIndex:
    ids: list
    fingerprints: list
    embeddings: np.ndarray  # (K, D_prior)
    budget: int
    _matrix: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.size == 0:
            self.embeddings = emb.reshape(0, emb.shape[-1] if emb.ndim == 2 else 0)
        else:
            self.embeddings = emb.reshape(len(self.ids), -1)
        if len(self.ids) > self.budget:
            raise ValueError("index holds more centroids than its budget")
        order = sorted(range(len(self.ids)), key=lambda k: self.ids[k])
        self.ids = [self.ids[k] for k in order]
        self.fingerprints = [self.fingerprints[k] for k in order]
        self.embeddings = self.embeddings[order] if self.ids else self.embeddings

    @property
    def dim(self):
        return self.embeddings.shape[1]

    def __len__(self):
        return len(self.ids)

    def matrix(self):
        if self._matrix is None:
            self._matrix = fingerprint_matrix(self.fingerprints)
        return self._matrix


def neighbor_lists(matrix, threshold):
    """Indices j != i with tanimoto(i, j) > threshold, for every row i."""
    n = matrix.shape[0]
    out = []
    for start in range(0, n, CHUNK_ROWS):
        sim = tanimoto_matrix(matrix[start:start + CHUNK_ROWS], matrix)
        for r in range(sim.shape[0]):
            row = np.nonzero(sim[r] > threshold)[0]
            out.append(row[row != start + r])
    return out


def _centroid(members, matrix):
    """Member with maximal mean similarity to the others (members sorted by id)."""
    if len(members) <= 2:
        return members[0]
    sub = matrix[members]
    sim = tanimoto_matrix(sub, sub)
    score = (sim.sum(axis=1) - np.diag(sim)) / (len(members) - 1)
    return members[int(np.argmax(score))]  # first maximum = smallest id


def butina_cluster(fps, threshold=DEFAULT_THRESHOLD):
    """Sphere-exclusion clustering of an ``{id: Fingerprint}`` map.

    The next seed is always the unassigned compound with the most unassigned
    neighbours (ties by id); it absorbs all of those neighbours.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    if not fps:
        raise EmptyLibrary("cannot cluster an empty library")
    ids = sorted(fps)
    matrix = fingerprint_matrix(fps[i] for i in ids)
    nbrs = neighbor_lists(matrix, threshold)
    n = len(ids)
    counts = np.array([len(x) for x in nbrs], dtype=np.int64)
    assigned = np.zeros(n, dtype=bool)
    heap = [(-int(counts[i]), i) for i in range(n)]
    heapq.heapify(heap)
    clusters = []
    while heap:
        neg, i = heapq.heappop(heap)
        if assigned[i]:
            continue
        if -neg != counts[i]:
            heapq.heappush(heap, (-int(counts[i]), i))
            continue
        absorbed = [j for j in nbrs[i] if not assigned[j]]
        assigned[i] = True
        assigned[absorbed] = True
        for j in [i] + absorbed:
            for k in nbrs[j]:
                if not assigned[k]:
                    counts[k] -= 1
        members = sorted([i] + absorbed)
        clusters.append(Cluster(
            member_ids=tuple(ids[m] for m in members),
            centroid_id=ids[_centroid(members, matrix)],
            seed_id=ids[i],
        ))
    return clusters


def cluster_library(fps, threshold=DEFAULT_THRESHOLD, max_size=DEFAULT_MAX_CLUSTER_SIZE, seed=0):
    """Cluster a library, sampling when it exceeds ``max_size``.

    Above the cap a seeded random sample of ``max_size`` compounds is
    clustered; every remaining compound joins the cluster whose centroid it
    is most similar to (ties by centroid id). Centroids are not recomputed.
    """
    if not fps:
        raise EmptyLibrary("cannot cluster an empty library")
    if len(fps) <= max_size:
        return butina_cluster(fps, threshold)
    ids = sorted(fps)
    rng = np.random.default_rng(seed)
    picked = set(rng.choice(len(ids), size=max_size, replace=False).tolist())
    sample = {ids[k]: fps[ids[k]] for k in sorted(picked)}
    clusters = sorted(butina_cluster(sample, threshold), key=lambda c: c.centroid_id)
    cmat = fingerprint_matrix(fps[c.centroid_id] for c in clusters)
    extra = [[] for _ in clusters]
    rest = [ids[k] for k in range(len(ids)) if k not in picked]
    for start in range(0, len(rest), CHUNK_ROWS):
        chunk = rest[start:start + CHUNK_ROWS]
        sim = tanimoto_matrix(fingerprint_matrix(fps[c] for c in chunk), cmat)
        for cid, k in zip(chunk, np.argmax(sim, axis=1).tolist()):
            extra[k].append(cid)
    return [Cluster(tuple(sorted(c.member_ids + tuple(x))), c.centroid_id, c.seed_id)
            for c, x in zip(clusters, extra)]


def prior_budget(library_size, compounds_per_center=DEFAULT_COMPOUNDS_PER_CENTER):
    if compounds_per_center < 1:
        raise ValueError("compounds_per_center must be >= 1")
    return max(1, math.ceil(library_size / compounds_per_center))


def select_centroids(clusters, budget):
    """The ``budget`` largest clusters, ties by centroid id."""
    return sorted(clusters, key=lambda c: (-len(c.member_ids), c.centroid_id))[:budget]


def build_prior_index(clusters, teacher_embeddings, fps, library_size,
                      compounds_per_center=DEFAULT_COMPOUNDS_PER_CENTER):
    """Keep the centroids of the ``budget`` largest clusters with their embeddings."""
    budget = prior_budget(library_size, compounds_per_center)
    ranked = select_centroids(clusters, budget)
    rows = []
    for c in ranked:
        if c.centroid_id not in teacher_embeddings:
            raise MissingEmbedding(c.centroid_id)
        rows.append(np.asarray(teacher_embeddings[c.centroid_id], dtype=np.float64))
    if len({r.shape for r in rows}) > 1:
        raise ValueError("teacher embeddings differ in dimension")
    emb = np.stack(rows) if rows else np.zeros((0, 0))
    return CentroidIndex([c.centroid_id for c in ranked],
                         [fps[c.centroid_id] for c in ranked], emb, budget)


def nearest_centroids(matrix, index):
    """Row index into ``index`` of the nearest centroid for each fingerprint row."""
    if len(index) == 0:
        raise EmptyIndex("prior index has no centroids")
    cmat = index.matrix()
    if matrix.shape[1] != cmat.shape[1]:
        raise WidthMismatch("fingerprint width differs from the prior index")
    out = np.empty(matrix.shape[0], dtype=np.int64)
    for start in range(0, matrix.shape[0], CHUNK_ROWS):
        sim = tanimoto_matrix(matrix[start:start + CHUNK_ROWS], cmat)
        out[start:start + sim.shape[0]] = np.argmax(sim, axis=1)
    return out


def nearest_centroid(fp, index):
    """``(centroid id, prior embedding)`` maximizing Tanimoto to ``fp``."""
    k = int(nearest_centroids(fingerprint_matrix([fp]), index)[0])
    return index.ids[k], index.embeddings[k]


# --- prior-index file --------------------------------------------------------

def write_prior_index(path, index):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={index.dim if len(index) else 0} count={len(index)}\n")
        for cid, fp, emb in zip(index.ids, index.fingerprints, index.embeddings):
            floats = " ".join(repr(float(x)) for x in emb)
            fh.write(f"{cid}\t{fp.to_hex()}\t{floats}\n")


def read_prior_index(path, radius=2):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        fields = dict(tok.split("=", 1) for tok in header)
        dim, count = int(fields["dim"]), int(fields["count"])
        ids, fps, rows = [], [], []
        for line in fh:
            if not line.strip():
                continue
            cid, hexfp, floats = line.rstrip("\n").split("\t")
            vec = [float(x) for x in floats.split()]
            if len(vec) != dim:
                raise ValueError(f"{path}: centroid {cid!r} has {len(vec)} values, expected {dim}")
            ids.append(cid)
            fps.append(Fingerprint.from_hex(hexfp, radius))
            rows.append(vec)
    if len(ids) != count:
        raise ValueError(f"{path}: header says {count} centroids, found {len(ids)}")
    emb = np.array(rows, dtype=np.float64).reshape(count, dim)
    return CentroidIndex(ids, fps, emb, max(count, 1))
