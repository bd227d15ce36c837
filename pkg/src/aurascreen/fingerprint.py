"""ECFP (Morgan) bit fingerprints, Tanimoto similarity and the AFP1 cache.

Bit assignment is pinned for reproducibility rather than toolkit
compatibility: every atom identifier is the 64-bit FNV-1a hash of its
invariant tuple, each tuple element encoded as an unsigned little-endian
64-bit word (negative integers in two's complement). Bits are set at
``identifier % width`` for every radius from 0 to ``radius``.

Initial invariant (heavy atoms only):
    (atomic number, heavy degree, total H, formal charge, ring member, aromatic)
Iteration r:
    (identifier_{r-1}, bond_code_1, nbr_identifier_1, bond_code_2, ...)
with neighbor pairs sorted ascending. Bond codes: single 1, double 2,
triple 3, aromatic 4.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF
CACHE_MAGIC = b"AFP1"


class WidthMismatch(ValueError):
    pass


def fnv1a64(data):
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def hash_words(words):
    """FNV-1a over the little-endian u64 encoding of ``words``."""
    return fnv1a64(struct.pack(f"<{len(words)}Q", *(w & MASK64 for w in words)))


@dataclass(frozen=True)
class Fingerprint:
    bits: int  # bit i set <=> feature i present
    width: int = 1024
    radius: int = 2

    def __post_init__(self):
        if self.width <= 0 or self.width & (self.width - 1):
            raise ValueError(f"width must be a power of two, got {self.width}")
        if self.bits < 0 or self.bits >> self.width:
            raise ValueError("bits exceed fingerprint width")

    @classmethod
    def from_on_bits(cls, on_bits, width=1024, radius=2):
        value = 0
        for b in on_bits:
            value |= 1 << b
        return cls(value, width, radius)

    @classmethod
    def from_bytes(cls, data, width, radius=2):
        return cls(int.from_bytes(data, "little"), width, radius)

    @classmethod
    def from_hex(cls, text, radius=2):
        data = bytes.fromhex(text)
        return cls.from_bytes(data, len(data) * 8, radius)

    def popcount(self):
        return self.bits.bit_count()

    def on_bits(self):
        out = []
        value = self.bits
        while value:
            low = value & -value
            out.append(low.bit_length() - 1)
            value ^= low
        return out

    def to_bytes(self):
        """Bit i lives in byte i // 8 at position i % 8 (LSB first)."""
        return self.bits.to_bytes(self.width // 8, "little")

    def to_hex(self):
        return self.to_bytes().hex()

    def to_array(self):
        return np.unpackbits(np.frombuffer(self.to_bytes(), dtype=np.uint8), bitorder="little")


def atom_invariants(mol):
    """Initial identifiers for heavy atoms, keyed by atom index."""
    inv = {}
    for i in mol.heavy_indices:
        atom = mol.atoms[i]
        inv[i] = hash_words((atom.element, mol.heavy_degree(i), mol.total_h(i),
                             atom.formal_charge, int(atom.ring_member), int(atom.aromatic)))
    return inv


def ecfp_identifiers(mol, radius=2):
    """List (per radius 0..radius) of {atom index: identifier}."""
    layers = [atom_invariants(mol)]
    nbrs = {i: mol.heavy_neighbors(i) for i in mol.heavy_indices}
    for _ in range(radius):
        prev = layers[-1]
        cur = {}
        for i in mol.heavy_indices:
            pairs = sorted((int(order), prev[j]) for j, order in nbrs[i])
            words = [prev[i]]
            for code, ident in pairs:
                words.append(code)
                words.append(ident)
            cur[i] = hash_words(words)
        layers.append(cur)
    return layers


def ecfp(mol, radius=2, width=1024):
    """ECFP bit fingerprint (radius 2 = ECFP4)."""
    mol.require_valid()
    if radius < 0:
        raise ValueError("radius must be >= 0")
    bits = 0
    for layer in ecfp_identifiers(mol, radius):
        for ident in layer.values():
            bits |= 1 << (ident % width)
    return Fingerprint(bits, width, radius)


def _fnv_rows(words):
    """Row-wise FNV-1a over a ``(n, k)`` uint64 word matrix (vectorized)."""
    data = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    h = np.full(data.shape[0], FNV_OFFSET, dtype=np.uint64)
    prime = np.uint64(FNV_PRIME)
    for col in range(data.shape[1]):
        h ^= data[:, col]
        h *= prime
    return h


def ecfp_batch(mols, radius=2, width=1024):
    """ECFP for many molecules at once; bit-identical to :func:`ecfp`."""
    mols = list(mols)
    for mol in mols:
        mol.require_valid()
    # Flatten heavy atoms of all molecules into one index space.
    owner, init_rows = [], []
    src, dst, code = [], [], []
    offset = 0
    for m_idx, mol in enumerate(mols):
        local = {a: offset + k for k, a in enumerate(mol.heavy_indices)}
        for a in mol.heavy_indices:
            atom = mol.atoms[a]
            owner.append(m_idx)
            init_rows.append([w & MASK64 for w in (
                atom.element, mol.heavy_degree(a), mol.total_h(a), atom.formal_charge,
                int(atom.ring_member), int(atom.aromatic))])
            for b, order in mol.heavy_neighbors(a):
                src.append(local[a])
                dst.append(local[b])
                code.append(int(order))
        offset += len(local)
    n = offset
    owner = np.asarray(owner, dtype=np.int64)
    ident = _fnv_rows(np.asarray(init_rows, dtype=np.uint64).reshape(n, 6)) if n else \
        np.zeros(0, dtype=np.uint64)
    layers = [ident]
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    code = np.asarray(code, dtype=np.uint64)
    degree = np.bincount(src, minlength=n) if n else np.zeros(0, dtype=np.int64)
    for _ in range(radius):
        prev = layers[-1]
        nbr_id = prev[dst]
        order = np.lexsort((nbr_id, code, src))
        s_code, s_id = code[order], nbr_id[order]
        starts = np.concatenate([[0], np.cumsum(degree)[:-1]]) if n else degree
        new = np.empty(n, dtype=np.uint64)
        for d in np.unique(degree):
            atoms = np.nonzero(degree == d)[0]
            mat = np.empty((len(atoms), 1 + 2 * d), dtype=np.uint64)
            mat[:, 0] = prev[atoms]
            for k in range(d):
                pos = starts[atoms] + k
                mat[:, 1 + 2 * k] = s_code[pos]
                mat[:, 2 + 2 * k] = s_id[pos]
            new[atoms] = _fnv_rows(mat)
        layers.append(new)
    bit_lists = [[] for _ in mols]
    for layer in layers:
        pos = (layer % np.uint64(width)).astype(np.int64)
        for m_idx, b in zip(owner.tolist(), pos.tolist()):
            bit_lists[m_idx].append(b)
    return [Fingerprint.from_on_bits(bits, width, radius) for bits in bit_lists]


def tanimoto(a, b):
    """|a & b| / |a | b|, 1.0 when both are empty."""
    if a.width != b.width:
        raise WidthMismatch(f"fingerprint widths differ: {a.width} vs {b.width}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


def fingerprint_matrix(fps):
    """Stack fingerprints into a dense ``(n, width)`` uint8 0/1 matrix."""
    fps = list(fps)
    if not fps:
        return np.zeros((0, 0), dtype=np.uint8)
    width = fps[0].width
    if any(fp.width != width for fp in fps):
        raise WidthMismatch("mixed fingerprint widths")
    packed = np.frombuffer(b"".join(fp.to_bytes() for fp in fps), dtype=np.uint8)
    return np.unpackbits(packed.reshape(len(fps), width // 8), axis=1, bitorder="little")


def tanimoto_matrix(a, b):
    """Pairwise Tanimoto between the rows of two 0/1 matrices (float64)."""
    if a.shape[1] != b.shape[1]:
        raise WidthMismatch("matrix widths differ")
    af = a.astype(np.float32)
    bf = b.astype(np.float32)
    inter = (af @ bf.T).astype(np.float64)  # exact: counts <= width < 2**24
    pa = af.sum(axis=1, dtype=np.float64)[:, None]
    pb = bf.sum(axis=1, dtype=np.float64)[None, :]
    union = pa + pb - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 1.0)
    return sim


# --- AFP1 cache ------------------------------------------------------------

def write_cache(path, items):
    """Write ``[(compound_id, Fingerprint), ...]`` in the AFP1 binary format."""
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        for cid, fp in items:
            raw = cid.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ValueError(f"compound id too long: {cid[:40]}...")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", fp.width))
            fh.write(fp.to_bytes())


def read_cache(path, radius=2):
    out = []
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CACHE_MAGIC:
        raise ValueError(f"{path}: not an AFP1 fingerprint cache")
    pos = 4
    while pos < len(data):
        (n,) = struct.unpack_from("<H", data, pos)
        pos += 2
        cid = data[pos:pos + n].decode("utf-8")
        pos += n
        (width,) = struct.unpack_from("<I", data, pos)
        pos += 4
        nbytes = width // 8
        if pos + nbytes > len(data):
            raise ValueError(f"{path}: truncated record for {cid!r}")
        out.append((cid, Fingerprint.from_bytes(data[pos:pos + nbytes], width, radius)))
        pos += nbytes
    return out
