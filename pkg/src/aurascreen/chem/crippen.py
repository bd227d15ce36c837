"""Wildman-Crippen atom typing for cLogP.

Contributions live in ``data/crippen_v1.json``; the typing rules below are
written procedurally and tried in table order, first match wins. Bond
predicates follow SMARTS conventions: ``"~"`` is the default single-or-
aromatic bond, ``"-"``, ``"="``, ``"#"`` and ``":"`` are exact orders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .smiles import BondOrder

HETERO = {7, 8, 15, 16}
HALOGENS = {9, 17, 35, 53}
ALKALI = {3, 11, 19, 37, 55}
ME1 = {3, 11, 19, 37, 55, 4, 12, 20, 38, 56, 5, 13, 31, 49, 81,
       14, 32, 50, 82, 33, 51, 83, 34, 52, 84}
ME2 = set(range(21, 31)) | set(range(39, 49)) | set(range(72, 81))


@lru_cache(maxsize=None)
def contribution_table():
    """(version, contributions dict, default) from the shipped data file."""
    with resources.files("aurascreen.chem").joinpath("data/crippen_v1.json").open() as fh:
        data = json.load(fh)
    return data["version"], data["contributions"], data["default_contribution"]


def _bond_ok(spec, order):
    if spec == "~":
        return order in (BondOrder.SINGLE, BondOrder.AROMATIC)
    if spec == "-":
        return order == BondOrder.SINGLE
    if spec == "=":
        return order == BondOrder.DOUBLE
    if spec == "#":
        return order == BondOrder.TRIPLE
    return order == BondOrder.AROMATIC


class _Ctx:
    """Per-molecule view with the quantities SMARTS primitives refer to."""

    def __init__(self, mol):
        self.mol = mol
        self.atoms = mol.atoms
        self.nbrs = [mol.heavy_neighbors(i) for i in range(len(mol.atoms))]
        self.h = [mol.total_h(i) for i in range(len(mol.atoms))]

    def el(self, i):
        return self.atoms[i].element

    def ar(self, i):
        return self.atoms[i].aromatic

    def q(self, i):
        return self.atoms[i].formal_charge

    def x(self, i):
        return len(self.nbrs[i]) + self.h[i]

    def match(self, i, specs, exclude=()):
        """True if atom i has distinct heavy neighbors satisfying each (bond, pred)."""
        cands = [(j, o) for j, o in self.nbrs[i] if j not in exclude]

        def rec(k, used):
            if k == len(specs):
                return True
            bspec, pred = specs[k]
            for j, o in cands:
                if j not in used and _bond_ok(bspec, o) and pred(j):
                    if rec(k + 1, used | {j}):
                        return True
            return False

        return rec(0, frozenset())

    def has(self, i, bspec, pred, exclude=()):
        return self.match(i, [(bspec, pred)], exclude)


def _type_carbon(c, i):
    ar, h, x = c.ar(i), c.h[i], c.x(i)
    C = lambda j: c.el(j) == 6 and not c.ar(j)  # noqa: E731
    A = lambda j: not c.ar(j)  # noqa: E731
    a = lambda j: c.ar(j)  # noqa: E731
    het = lambda j: (c.el(j) in HETERO and not c.ar(j)) or c.el(j) in HALOGENS  # noqa: E731

    if not ar:
        if h == 4 or (h == 3 and c.has(i, "~", C)) or (h == 2 and c.match(i, [("~", C)] * 2)):
            return "C1"
        if (h == 1 and c.match(i, [("~", C)] * 3)) or c.match(i, [("~", C)] * 4):
            return "C2"
        if (h == 3 and c.has(i, "~", het)) or (
                h == 2 and x == 4 and c.match(i, [("~", het), ("~", A)])):
            return "C3"
        if x == 4 and ((h == 1 and c.match(i, [("~", het), ("~", A), ("~", A)]))
                       or (h == 0 and c.match(i, [("~", het), ("~", A), ("~", A), ("~", A)]))):
            return "C4"
        if c.has(i, "=", lambda j: not c.ar(j) and c.el(j) != 6):
            return "C5"
        if ((h == 2 and c.has(i, "=", C))
                or (h == 1 and c.match(i, [("=", C), ("~", A)]))
                or (h == 0 and c.match(i, [("=", C), ("~", A), ("~", A)]))
                or c.match(i, [("=", C), ("=", C)])):
            return "C6"
        if x == 2 and c.has(i, "#", A):
            return "C7"
        if h == 3 and c.has(i, "~", lambda j: c.ar(j) and c.el(j) == 6):
            return "C8"
        if h == 3 and c.has(i, "~", a):
            return "C9"
        if x == 4 and c.has(i, "~", a):
            return {2: "C10", 1: "C11", 0: "C12"}.get(h, "CS")
    else:
        if h == 0 and c.has(i, "-", lambda j: not c.ar(j) and c.el(j) not in
                            {6, 7, 8, 16, 9, 17, 35, 53, 1}):
            return "C13"
        for el, label in ((9, "C14"), (17, "C15"), (35, "C16"), (53, "C17")):
            if c.has(i, "~", lambda j, el=el: c.el(j) == el):
                return label
        if h == 1:
            return "C18"
        ring2 = [(":", a), (":", a)]
        if c.match(i, ring2 + [(":", a)]):
            return "C19"
        if c.match(i, ring2 + [("-", a)]):
            return "C20"
        for el, label in ((6, "C21"), (7, "C22"), (8, "C23"), (16, "C24")):
            if c.match(i, ring2 + [("-", lambda j, el=el: c.el(j) == el and not c.ar(j))]):
                return label
        if c.match(i, ring2 + [("=", lambda j: c.el(j) in (6, 7, 8) and not c.ar(j))]):
            return "C25"
    if not ar:
        if (c.match(i, [("=", C), ("~", a), ("~", A)])
                or c.match(i, [("=", C), ("~", lambda j: c.ar(j) and c.el(j) == 6), ("~", a)])
                or (h == 1 and c.match(i, [("=", C), ("~", a)]))
                or c.has(i, "=", lambda j: c.ar(j) and c.el(j) == 6)):
            return "C26"
        if x == 4 and c.has(i, "~", lambda j: not c.ar(j) and c.el(j) not in
                            {6, 7, 8, 15, 16, 9, 17, 35, 53, 1}):
            return "C27"
    return "CS"


def _type_nitrogen(c, i):
    ar, h, q = c.ar(i), c.h[i], c.q(i)
    A = lambda j: not c.ar(j)  # noqa: E731
    a = lambda j: c.ar(j)  # noqa: E731
    heavy = lambda j: True  # noqa: E731
    if ar:
        if q == 0:
            return "N11"
        if q in (1, 2, 3):
            return "N12"
        return "NS"
    if q == 0:
        if h == 2 and c.has(i, "~", A):
            return "N1"
        if h == 1 and c.match(i, [("~", A), ("~", A)]):
            return "N2"
        if h == 2 and c.has(i, "~", a):
            return "N3"
        if h == 1 and c.match(i, [("~", heavy), ("~", a)]):
            return "N4"
        if h == 1 and c.has(i, "=", heavy):
            return "N5"
        if c.match(i, [("=", heavy), ("~", heavy)]):
            return "N6"
        if c.match(i, [("~", A)] * 3):
            return "N7"
        if c.match(i, [("~", a), ("~", heavy), ("~", A)]) or c.match(i, [("~", a)] * 3):
            return "N8"
        if c.has(i, "#", A):
            return "N9"
    if h in (1, 2, 3) and q in (1, 2, 3):
        return "N10"
    if q in (1, 2, 3) and h == 0 and (
            c.match(i, [("~", A)] * 4)
            or c.match(i, [("=", A), ("~", A), ("~", heavy)])
            or c.match(i, [("=", lambda j: c.el(j) == 6), ("=", lambda j: c.el(j) == 7)])):
        return "N13"
    if q > 0 and c.has(i, "#", A):
        return "N14"
    if q < 0:
        return "N14"
    if q > 0 and c.match(i, [("=", lambda j: c.el(j) == 7 and not c.ar(j) and c.q(j) < 0),
                             ("=", lambda j: c.el(j) == 7 and not c.ar(j))]):
        return "N14"
    return "NS"


def _type_oxygen(c, i):
    ar, h, q, x = c.ar(i), c.h[i], c.q(i), c.x(i)
    A = lambda j: not c.ar(j)  # noqa: E731
    a = lambda j: c.ar(j)  # noqa: E731
    heavy = lambda j: True  # noqa: E731
    C = lambda j: c.el(j) == 6 and not c.ar(j)  # noqa: E731
    if ar:
        return "O1"
    if h in (1, 2):
        return "O2"
    if c.match(i, [("~", A), ("~", A)]):
        return "O3"
    if c.match(i, [("~", a), ("~", heavy)]):
        return "O4"
    if c.has(i, "=", lambda j: c.el(j) in (7, 8)) or (
            x == 1 and q < 0 and c.has(i, "~", lambda j: c.el(j) == 7)):
        return "O5"
    if (x == 1 and q in (-1, -2) and c.has(i, "~", lambda j: c.el(j) == 16)) or (
            q == 0 and c.has(i, "=", lambda j: c.el(j) == 16 and c.q(j) == 0)):
        return "O6"
    if q == -1 and c.has(i, "~", lambda j: C(j) and c.has(
            j, "=", lambda k: c.el(k) == 8 and not c.ar(k), exclude=(i,))):
        return "O12"
    if x == 1 and q < 0 and c.has(i, "~", lambda j: not (c.el(j) in (7, 16) and not c.ar(j))):
        return "O7"
    if c.has(i, "=", lambda j: c.el(j) == 6 and c.ar(j)):
        return "O8"

    def carbonyl(pred):
        return c.has(i, "=", lambda j: C(j) and pred(j))

    ex = (i,)
    if (carbonyl(lambda j: c.h[j] == 1 and c.has(j, "~", C, ex))
            or carbonyl(lambda j: c.match(j, [("~", C), ("~", A)], ex))
            or carbonyl(lambda j: c.h[j] == 1 and c.has(
                j, "~", lambda k: c.el(k) in (7, 8) and not c.ar(k), ex))
            or carbonyl(lambda j: c.h[j] == 2)
            or carbonyl(lambda j: c.x(j) == 2 and c.has(
                j, "=", lambda k: c.el(k) == 8 and not c.ar(k), ex))):
        return "O9"
    arom_c = lambda j: c.el(j) == 6 and c.ar(j)  # noqa: E731
    if (carbonyl(lambda j: c.h[j] == 1 and c.has(j, "~", arom_c, ex))
            or carbonyl(lambda j: c.match(j, [("~", lambda k: c.el(k) == 6), ("~", a)], ex))
            or carbonyl(lambda j: c.match(j, [("~", arom_c), ("~", A)], ex))):
        return "O10"
    if carbonyl(lambda j: c.match(j, [("~", lambda k: c.el(k) != 6)] * 2, ex)):
        return "O11"
    return "OS"


def _type_heavy(c, i):
    el, q, ar = c.el(i), c.q(i), c.ar(i)
    if el == 6:
        return _type_carbon(c, i)
    if el == 7:
        return _type_nitrogen(c, i)
    if el == 8:
        return _type_oxygen(c, i)
    if el in HALOGENS:
        if q == 0:
            return {9: "F", 17: "Cl", 35: "Br", 53: "I"}[el]
        if q < 0 or el == 53:
            return "Hal"
        return None
    if el in ALKALI and q > 0:
        return "Hal"
    if el == 15:
        return "P"
    if el == 16:
        if not ar and q in (-1, -2, -3, -4, 1, 2, 3, 5, 6):
            return "S2"
        if not ar and q == 0 and c.has(
                i, "=", lambda j: c.el(j) in (7, 8, 15, 16) and not c.ar(j)):
            return "S2"
        return "S3" if ar else "S1"
    if el in ME1:
        return "Me1"
    if el in ME2:
        return "Me2"
    return None


def _type_hydrogen(c, parent):
    """Type of a hydrogen bonded to heavy atom ``parent`` (None: free H)."""
    if parent is None:
        return "HS"
    el, ar = c.el(parent), c.ar(parent)
    if el in (6, 1):
        return "H1"
    # Other neighbours of the parent O besides this H: heavy atoms plus spare Hs.
    if el == 8 and not ar:
        others = [j for j, _ in c.nbrs[parent]]
        spare_h = c.h[parent] - 1
        if any((c.el(j) == 6 and not c.ar(j) and c.x(j) == 4) or (c.el(j) == 6 and c.ar(j))
               for j in others):
            return "H2"
        if spare_h > 0 or any(not (c.el(j) in (6, 7, 8, 16) and not c.ar(j)) for j in others):
            return "H2"
    # Aromatic [nH] hydrogens type as amine H, matching the reference tables.
    if el == 7:
        return "H3"
    if not (el in (6, 8) and not ar):
        return "H2"
    if el == 8:
        others = [j for j, _ in c.nbrs[parent]]
        if any(c.el(j) == 7 for j in others):
            return "H3"
        if any(c.el(j) == 6 and not c.ar(j) and c.has(
                j, "=", lambda k: c.el(k) in (6, 7) or (c.el(k) in (8, 16) and not c.ar(k)),
                exclude=(parent,)) for j in others):
            return "H4"
        if any(c.el(j) in (8, 16) and not c.ar(j) for j in others):
            return "H4"
    return "HS"


@dataclass(frozen=True)
class CrippenResult:
    logp: float
    types: tuple  # per heavy atom: (atom index, type label or None)
    untyped: tuple  # atom indices that fell back to the default contribution


def crippen_logp(mol):
    """Sum of atomic contributions over heavy atoms and their hydrogens."""
    _, table, default = contribution_table()
    c = _Ctx(mol)
    total = 0.0
    types = []
    untyped = []
    for i, atom in enumerate(mol.atoms):
        if atom.element == 1:
            heavy = [j for j, _ in mol.adjacency[i] if mol.atoms[j].element != 1]
            if heavy:
                continue  # counted with its parent below
            h_nbrs = [j for j, _ in mol.adjacency[i]]
            label = "H1" if h_nbrs else "HS"
            total += table[label]
            types.append((i, label))
            continue
        label = _type_heavy(c, i)
        types.append((i, label))
        if label is None:
            untyped.append(i)
            total += default
        else:
            total += table[label]
        n_h = c.h[i]
        if n_h:
            total += n_h * table[_type_hydrogen(c, i)]
    return CrippenResult(total, tuple(types), tuple(untyped))
