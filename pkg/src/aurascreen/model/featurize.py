"""Synthesized token representations for the teacher path.

Stands in for a structure-model trunk: protein tokens are fixed random
projections of the protein embedding, ligand tokens are one per heavy atom
built from atom features, and pair features encode token kinds, bonds and
topological distance plus a fixed bilinear interaction of the two tokens.
The projections are drawn once from ``featurizer_seed`` and never trained.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .teacher import TokenReps

ELEMENT_SLOTS = (6, 7, 8, 16, 9, 17, 35, 53, 15, 5)  # anything else -> "other"
ATOM_FEATURES = len(ELEMENT_SLOTS) + 1 + 7
PAIR_FEATURES = 9


def atom_features(mol):
    """``(n_heavy, ATOM_FEATURES)`` matrix in heavy-atom order."""
    rows = []
    for i in mol.heavy_indices:
        atom = mol.atoms[i]
        onehot = [float(atom.element == e) for e in ELEMENT_SLOTS]
        onehot.append(float(atom.element not in ELEMENT_SLOTS))
        deg = mol.heavy_degree(i)
        rows.append(onehot + [
            float(atom.aromatic), float(atom.ring_member),
            float(deg == 1), float(deg == 2), float(deg >= 3),
            mol.total_h(i) / 3.0, float(atom.formal_charge),
        ])
    return np.array(rows, dtype=np.float64).reshape(len(rows), ATOM_FEATURES)


def topological_distances(mol):
    """Shortest-path bond counts between heavy atoms (0 where disconnected)."""
    heavy = mol.heavy_indices
    pos = {a: k for k, a in enumerate(heavy)}
    n = len(heavy)
    dist = np.zeros((n, n))
    for k, start in enumerate(heavy):
        seen = {start: 0}
        queue = deque([start])
        while queue:
            a = queue.popleft()
            for b, _ in mol.heavy_neighbors(a):
                if b not in seen:
                    seen[b] = seen[a] + 1
                    queue.append(b)
        for a, d in seen.items():
            dist[k, pos[a]] = d
    return dist


def bond_orders(mol):
    """``(n_heavy, n_heavy)`` bond code matrix (0 = no bond)."""
    pos = {a: k for k, a in enumerate(mol.heavy_indices)}
    out = np.zeros((len(pos), len(pos)), dtype=np.int64)
    for bond in mol.bonds:
        if bond.a in pos and bond.b in pos:
            out[pos[bond.a], pos[bond.b]] = out[pos[bond.b], pos[bond.a]] = int(bond.order)
    return out


class TeacherFeaturizer:
    def __init__(self, cfg, d_prot):
        rng = np.random.default_rng(cfg.featurizer_seed)
        ds, dz = cfg.d_single, cfg.d_pair
        self.cfg = cfg
        self.d_prot = d_prot
        self.n_protein = cfg.n_protein_tokens
        self.prot_proj = rng.normal(0.0, 1.0 / np.sqrt(d_prot), size=(self.n_protein, d_prot, ds))
        self.atom_proj = rng.normal(0.0, 1.0 / np.sqrt(ATOM_FEATURES), size=(ATOM_FEATURES, ds))
        self.pair_proj = rng.normal(0.0, 1.0 / np.sqrt(PAIR_FEATURES), size=(PAIR_FEATURES, dz))
        self.left = rng.normal(0.0, 1.0 / np.sqrt(ds), size=(ds, dz))
        self.right = rng.normal(0.0, 1.0 / np.sqrt(ds), size=(ds, dz))

    def complex_features(self, mol, protein):
        """Unbatched ``(s, z, is_ligand)`` for one protein-ligand complex."""
        protein = np.asarray(protein, dtype=np.float64).ravel()
        if protein.size != self.d_prot:
            raise ValueError(f"protein embedding has {protein.size} dims, expected {self.d_prot}")
        s_prot = np.tanh(np.einsum("d,kde->ke", protein, self.prot_proj))
        s_lig = np.tanh(atom_features(mol) @ self.atom_proj)
        s = np.concatenate([s_prot, s_lig])
        n_p, n_l = len(s_prot), len(s_lig)
        n = n_p + n_l
        lig = np.r_[np.zeros(n_p, dtype=bool), np.ones(n_l, dtype=bool)]
        f = np.zeros((n, n, PAIR_FEATURES))
        f[..., 0] = lig[:, None] & lig[None, :]
        f[..., 1] = lig[:, None] ^ lig[None, :]
        f[..., 2] = ~lig[:, None] & ~lig[None, :]
        orders = bond_orders(mol)
        for code in range(1, 5):
            f[n_p:, n_p:, 2 + code] = orders == code
        dist = topological_distances(mol)
        f[n_p:, n_p:, 7] = np.where(dist > 0, 1.0 / np.maximum(dist, 1.0), 0.0)
        f[..., 8] = np.eye(n)
        z = f @ self.pair_proj + (s @ self.left)[:, None, :] * (s @ self.right)[None, :, :]
        return s, z, lig

    def batch(self, mols, protein):
        """Pad a list of complexes into one TokenReps batch."""
        feats = [self.complex_features(m, protein) for m in mols]
        n = max(len(s) for s, _, _ in feats)
        B = len(feats)
        ds, dz = self.cfg.d_single, self.cfg.d_pair
        S = np.zeros((B, n, ds))
        Z = np.zeros((B, n, n, dz))
        sm = np.zeros((B, n), dtype=bool)
        lig = np.zeros((B, n), dtype=bool)
        for b, (s, z, l) in enumerate(feats):
            k = len(s)
            S[b, :k], Z[b, :k, :k], sm[b, :k], lig[b, :k] = s, z, True, l
        pm = sm[:, :, None] & sm[:, None, :]
        return TokenReps(S, Z, sm, pm, lig)
