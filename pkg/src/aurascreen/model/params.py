"""Model configuration, parameter initialization and the AURO checkpoint format."""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass

import numpy as np

CHECKPOINT_MAGIC = b"AURO"
CHECKPOINT_VERSION = 1


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TeacherConfig:
    d_single: int = 16
    d_pair: int = 8
    n_heads: int = 2
    head_dim: int = 8
    transition_mult: int = 2
    opm_dim: int = 4
    n_blocks: int = 4
    head_hidden: int = 16
    temperature: float = 1.0
    ligand_weight_ratio: float = 2.0
    ln_eps: float = 1e-5
    n_protein_tokens: int = 8
    featurizer_seed: int = 1729

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class StudentConfig:
    fp_width: int = 1024
    d_prot: int = 32
    d_prior: int = 16
    width: int = 32
    n_heads: int = 4
    n_blocks: int = 2
    transition_mult: int = 2
    ln_eps: float = 1e-5

    def as_dict(self):
        return asdict(self)


def _dense(rng, fan_in, fan_out, scale=1.0):
    return rng.normal(0.0, scale / np.sqrt(fan_in), size=(fan_in, fan_out))


def _ln(p, prefix, dim):
    p[prefix + ".gamma"] = np.ones(dim)
    p[prefix + ".beta"] = np.zeros(dim)


def init_teacher_params(cfg, seed=0):
    """Encoder blocks plus the affinity head. Output projections start small."""
    rng = np.random.default_rng(seed)
    ds, dz, h, c = cfg.d_single, cfg.d_pair, cfg.n_heads, cfg.head_dim
    p = {}
    for b in range(cfg.n_blocks):
        k = f"enc.{b}."
        _ln(p, k + "att_ln", ds)
        # no offset: a shared shift of all logits cancels in the softmax
        p[k + "bias_ln.gamma"] = np.ones(dz)
        p[k + "wq"] = _dense(rng, ds, h * c)
        p[k + "wk"] = _dense(rng, ds, h * c)
        p[k + "wv"] = _dense(rng, ds, h * c)
        p[k + "wb"] = _dense(rng, dz, h)
        p[k + "wo"] = _dense(rng, h * c, ds, 0.1)
        _ln(p, k + "tr_ln", ds)
        p[k + "tr_w1"] = _dense(rng, ds, cfg.transition_mult * ds)
        p[k + "tr_b1"] = np.zeros(cfg.transition_mult * ds)
        p[k + "tr_w2"] = _dense(rng, cfg.transition_mult * ds, ds, 0.1)
        p[k + "tr_b2"] = np.zeros(ds)
        _ln(p, k + "opm_ln", ds)
        p[k + "opm_a"] = _dense(rng, ds, cfg.opm_dim)
        p[k + "opm_b"] = _dense(rng, ds, cfg.opm_dim)
        p[k + "opm_w"] = rng.normal(0.0, 0.1 / cfg.opm_dim, size=(cfg.opm_dim, cfg.opm_dim, dz))
        p[k + "opm_bias"] = np.zeros(dz)
        _ln(p, k + "ptr_ln", dz)
        p[k + "ptr_w1"] = _dense(rng, dz, cfg.transition_mult * dz)
        p[k + "ptr_b1"] = np.zeros(cfg.transition_mult * dz)
        p[k + "ptr_w2"] = _dense(rng, cfg.transition_mult * dz, dz, 0.1)
        p[k + "ptr_b2"] = np.zeros(dz)
    for tag, dim in (("s", ds), ("z", dz)):
        k = f"head.{tag}_"
        _ln(p, k + "ln", dim)
        p[k + "gate"] = _dense(rng, dim, 1)
        p[k + "w1"] = _dense(rng, dim, cfg.head_hidden)
        p[k + "b1"] = np.zeros(cfg.head_hidden)
        p[k + "w2"] = _dense(rng, cfg.head_hidden, 1)
        p[k + "b2"] = np.zeros(1)
    return p


def init_student_params(cfg, seed=0):
    rng = np.random.default_rng(seed)
    w = cfg.width
    p = {
        "stu.fp_proj": _dense(rng, cfg.fp_width, w),
        "stu.prot_proj": _dense(rng, cfg.d_prot, w),
        "stu.prior_proj": _dense(rng, cfg.d_prior, w),
        "stu.type_emb": rng.normal(0.0, 0.1, size=(3, w)),
    }
    for b in range(cfg.n_blocks):
        k = f"stu.{b}."
        _ln(p, k + "att_ln", w)
        p[k + "wq"] = _dense(rng, w, w)
        p[k + "wk"] = _dense(rng, w, w)
        p[k + "wv"] = _dense(rng, w, w)
        p[k + "wo"] = _dense(rng, w, w, 0.5)
        _ln(p, k + "tr_ln", w)
        p[k + "tr_w1"] = _dense(rng, w, cfg.transition_mult * w)
        p[k + "tr_b1"] = np.zeros(cfg.transition_mult * w)
        p[k + "tr_w2"] = _dense(rng, cfg.transition_mult * w, w, 0.5)
        p[k + "tr_b2"] = np.zeros(w)
    p["stu.h_w"] = _dense(rng, w, cfg.d_prior)
    p["stu.h_b"] = np.zeros(cfg.d_prior)
    p["stu.y_w"] = _dense(rng, w, 1)
    p["stu.y_b"] = np.zeros(1)
    return p


def check_shapes(params, reference):
    """Raise ShapeMismatch unless ``params`` has exactly the reference names and shapes."""
    missing = sorted(set(reference) - set(params))
    extra = sorted(set(params) - set(reference))
    if missing or extra:
        raise ShapeMismatch(f"parameter names differ: missing {missing[:3]}, unexpected {extra[:3]}")
    for k, v in reference.items():
        if np.shape(params[k]) != np.shape(v):
            raise ShapeMismatch(f"{k}: expected {np.shape(v)}, got {np.shape(params[k])}")


# --- checkpoint ----------------------------------------------------------------

def save_checkpoint(path, params):
    """Write named tensors as little-endian float32, names in sorted order."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        for name in sorted(params):
            arr = np.asarray(params[name], dtype="<f4")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes(order="C"))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an AURO checkpoint")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 8
    params = {}
    while pos < len(data):
        (n,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + n].decode("utf-8")
        pos += n
        (rank,) = struct.unpack_from("<B", data, pos)
        pos += 1
        dims = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        pos += 4 * count
        params[name] = arr.astype(np.float64).reshape(dims)
    return params


def round_to_f32(params):
    """Parameters as they would read back from a checkpoint."""
    return {k: np.asarray(v, dtype=np.float32).astype(np.float64) for k, v in params.items()}


# --- protein embedding file ---------------------------------------------------------

def write_protein_embedding(path, vec):
    vec = np.asarray(vec, dtype=np.float64).ravel()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={vec.size}\n")
        fh.write(" ".join(repr(float(x)) for x in vec) + "\n")


def read_protein_embedding(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise ValueError(f"{path}: expected 'dim=<D>' header")
        dim = int(header[4:])
        vec = np.array(fh.read().split(), dtype=np.float64)
    if vec.size != dim:
        raise ShapeMismatch(f"{path}: header says {dim} values, found {vec.size}")
    return vec
