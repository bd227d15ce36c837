"""SMILES parsing into an immutable molecular graph.

Supported: the organic subset, bracket atoms (isotope, element, chirality,
H count, charge, atom class), aromatic lowercase atoms, branches, ring
closures (``1``..``9`` and ``%nn``), bond symbols ``- = # :`` and ``.``
fragment separators. Stereo markers (``/ \\ @``) are accepted and dropped.
Aromaticity is taken verbatim from the input; there is no perception step.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

from .elements import (
    AROMATIC_SYMBOLS,
    ELEMENTS,
    ORGANIC_SUBSET,
    SYMBOLS,
    VALENCES,
    allowed_valences,
)


class SmilesError(ValueError):
    """Base class for SMILES parse failures."""


class EmptyInput(SmilesError):
    pass


class UnbalancedParenthesis(SmilesError):
    pass


class UnclosedRing(SmilesError):
    pass


class UnknownAtomSymbol(SmilesError):
    pass


class SmilesSyntaxError(SmilesError):
    pass


class ValenceViolation(ValueError):
    def __init__(self, atom_index, message=None):
        self.atom_index = atom_index
        super().__init__(message or f"valence violation at atom {atom_index}")


class InvalidMolecule(ValueError):
    """Raised when a descriptor is requested for a molecule failing valence."""


class BondOrder(enum.IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4


@dataclass(frozen=True)
class Atom:
    element: int
    aromatic: bool = False
    formal_charge: int = 0
    explicit_h: int | None = None  # None: organic-subset atom, H implied
    isotope: int | None = None
    ring_member: bool = False
    implicit_h: int = 0

    @property
    def symbol(self):
        return SYMBOLS[self.element]

    @property
    def bracketed(self):
        return self.explicit_h is not None

    @property
    def own_h(self):
        """Hydrogens carried on the atom itself (not as separate graph nodes)."""
        return self.explicit_h if self.explicit_h is not None else self.implicit_h


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: BondOrder
    in_ring: bool = False

    def other(self, i):
        return self.b if i == self.a else self.a


@dataclass(frozen=True)
class Molecule:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    fragment_count: int
    source_smiles: str
    valence_error: int | None = None

    @property
    def valid(self):
        return self.valence_error is None

    @cached_property
    def adjacency(self):
        """Per-atom tuple of (neighbor index, BondOrder)."""
        adj = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append((bond.b, bond.order))
            adj[bond.b].append((bond.a, bond.order))
        return tuple(tuple(nbrs) for nbrs in adj)

    @cached_property
    def heavy_indices(self):
        return tuple(i for i, a in enumerate(self.atoms) if a.element != 1)

    def heavy_neighbors(self, i):
        return [(j, o) for j, o in self.adjacency[i] if self.atoms[j].element != 1]

    def heavy_degree(self, i):
        return sum(1 for j, _ in self.adjacency[i] if self.atoms[j].element != 1)

    def total_h(self, i):
        """Hydrogens on atom ``i``: implicit/bracket count plus H-atom neighbors."""
        nodes = sum(1 for j, _ in self.adjacency[i] if self.atoms[j].element == 1)
        return self.atoms[i].own_h + nodes

    def require_valid(self):
        if self.valence_error is not None:
            raise InvalidMolecule(
                f"{self.source_smiles!r}: valence violation at atom {self.valence_error}")


# --- tokenizer -------------------------------------------------------------

_BOND_SYMBOLS = {"-": BondOrder.SINGLE, "/": BondOrder.SINGLE, "\\": BondOrder.SINGLE,
                 "=": BondOrder.DOUBLE, "#": BondOrder.TRIPLE, ":": BondOrder.AROMATIC}
_CHIRAL_CLASSES = ("TH", "AL", "SP", "TB", "OH")


def _parse_bracket(body, position):
    """Parse the inside of ``[...]`` into Atom keyword arguments."""
    i, n = 0, len(body)
    isotope = None
    start = i
    while i < n and body[i].isdigit():
        i += 1
    if i > start:
        isotope = int(body[start:i])

    aromatic = False
    symbol = None
    # Two-letter aromatic symbols first (se, as), then elements, then c/n/o/...
    if body[i:i + 2] in AROMATIC_SYMBOLS:
        symbol, aromatic = AROMATIC_SYMBOLS[body[i:i + 2]], True
        i += 2
    elif i < n and body[i].isupper():
        if body[i:i + 2] in ELEMENTS and body[i + 1:i + 2].islower():
            symbol = body[i:i + 2]
            i += 2
        elif body[i] in ELEMENTS:
            symbol = body[i]
            i += 1
    elif body[i:i + 1] in AROMATIC_SYMBOLS:
        symbol, aromatic = AROMATIC_SYMBOLS[body[i]], True
        i += 1
    if symbol is None:
        raise UnknownAtomSymbol(f"unknown atom [{body}] at position {position}")

    if body[i:i + 1] == "@":
        i += 1
        if body[i:i + 1] == "@":
            i += 1
        elif body[i:i + 2] in _CHIRAL_CLASSES:
            i += 2
            while i < n and body[i].isdigit():
                i += 1

    hcount = 0
    if body[i:i + 1] == "H":
        i += 1
        hcount = 1
        start = i
        while i < n and body[i].isdigit():
            i += 1
        if i > start:
            hcount = int(body[start:i])

    charge = 0
    if i < n and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        j = i + 1
        if body[j:j + 1].isdigit():
            while j < n and body[j].isdigit():
                j += 1
            charge = sign * int(body[i + 1:j])
        else:
            while j < n and body[j] == body[i]:
                j += 1
            charge = sign * (j - i)
        i = j

    if body[i:i + 1] == ":":
        i += 1
        start = i
        while i < n and body[i].isdigit():
            i += 1
        if i == start:
            raise SmilesSyntaxError(f"empty atom class in [{body}] at position {position}")
    if i != n:
        raise SmilesSyntaxError(f"unparsed bracket content [{body}] at position {position}")

    return dict(element=ELEMENTS[symbol][0], aromatic=aromatic, formal_charge=charge,
                explicit_h=hcount, isotope=isotope)


def _implicit_h(element, aromatic, nonaromatic_sum, n_aromatic):
    valences = VALENCES.get(element)
    if valences is None:
        return 0
    if aromatic:
        return max(0, valences[0] - (nonaromatic_sum + n_aromatic + 1))
    for v in valences:
        if v >= nonaromatic_sum:
            return v - nonaromatic_sum
    return 0


def _valence_ok(atom, nonaromatic_sum, n_aromatic):
    allowed = allowed_valences(atom.element, atom.formal_charge)
    if allowed is None:
        return True
    used = nonaromatic_sum + n_aromatic + atom.own_h
    if atom.aromatic:
        if n_aromatic == 0:
            return False
        # An aromatic atom either donates a lone pair or takes a Kekulé double bond.
        return used in allowed or used + 1 in allowed
    return used in allowed


def _ring_bonds(n_atoms, edges):
    """Indices of edges lying on a cycle (non-bridges), iterative Tarjan."""
    adj = [[] for _ in range(n_atoms)]
    for k, (a, b) in enumerate(edges):
        adj[a].append((b, k))
        adj[b].append((a, k))
    disc = [-1] * n_atoms
    low = [0] * n_atoms
    bridges = set()
    counter = 0
    for root in range(n_atoms):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = counter
        counter += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            node, parent_edge, it = stack[-1]
            advanced = False
            for nbr, k in it:
                if k == parent_edge:
                    continue
                if disc[nbr] == -1:
                    disc[nbr] = low[nbr] = counter
                    counter += 1
                    stack.append((nbr, k, iter(adj[nbr])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nbr])
            if not advanced:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[node])
                    if low[node] > disc[parent]:
                        bridges.add(parent_edge)
    return {k for k in range(len(edges)) if k not in bridges}


def _count_components(n_atoms, edges):
    parent = list(range(n_atoms))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(n_atoms)})


def parse_smiles(text):
    """Parse ``text`` into a :class:`Molecule`.

    Valence problems do not raise here; they mark the molecule invalid
    (``valence_error`` holds the first offending atom index).
    """
    if text is None or not text.strip():
        raise EmptyInput("empty SMILES")
    text = text.strip()

    atom_kwargs = []
    edges = []  # (a, b, symbol or None)
    edge_set = set()
    branch_stack = []
    open_rings = {}
    prev = None
    pending = None  # bond symbol waiting for the next atom or ring digit
    i, n = 0, len(text)

    def add_edge(a, b, sym, pos):
        if a == b:
            raise SmilesSyntaxError(f"atom bonded to itself at position {pos}")
        key = (min(a, b), max(a, b))
        if key in edge_set:
            raise SmilesSyntaxError(f"duplicate bond {key} at position {pos}")
        edge_set.add(key)
        edges.append((a, b, sym))

    def add_atom(kwargs, pos):
        nonlocal prev, pending
        idx = len(atom_kwargs)
        atom_kwargs.append(kwargs)
        if prev is not None:
            add_edge(prev, idx, pending, pos)
        elif pending is not None:
            raise SmilesSyntaxError(f"bond without preceding atom at position {pos}")
        prev, pending = idx, None

    while i < n:
        ch = text[i]
        if ch == "[":
            close = text.find("]", i + 1)
            if close == -1:
                raise SmilesSyntaxError(f"unterminated bracket atom at position {i}")
            add_atom(_parse_bracket(text[i + 1:close], i), i)
            i = close + 1
        elif text[i:i + 2] in ("Cl", "Br"):
            add_atom(dict(element=ELEMENTS[text[i:i + 2]][0]), i)
            i += 2
        elif ch in ORGANIC_SUBSET:
            add_atom(dict(element=ELEMENTS[ch][0]), i)
            i += 1
        elif ch in "bcnops":
            add_atom(dict(element=ELEMENTS[AROMATIC_SYMBOLS[ch]][0], aromatic=True), i)
            i += 1
        elif ch in _BOND_SYMBOLS:
            if pending is not None:
                raise SmilesSyntaxError(f"consecutive bond symbols at position {i}")
            if prev is None:
                raise SmilesSyntaxError(f"bond without preceding atom at position {i}")
            pending = ch
            i += 1
        elif ch == "(":
            if prev is None or pending is not None:
                raise UnbalancedParenthesis(f"branch opened without an atom at position {i}")
            branch_stack.append(prev)
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise UnbalancedParenthesis(f"unmatched ')' at position {i}")
            if pending is not None:
                raise SmilesSyntaxError(f"dangling bond before ')' at position {i}")
            prev = branch_stack.pop()
            i += 1
        elif ch == ".":
            if pending is not None or branch_stack:
                raise SmilesSyntaxError(f"misplaced '.' at position {i}")
            prev = None
            i += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                digits = text[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesSyntaxError(f"bad %nn ring label at position {i}")
                label, width = int(digits), 3
            else:
                label, width = int(ch), 1
            if prev is None:
                raise SmilesSyntaxError(f"ring label without atom at position {i}")
            if label in open_rings:
                other, sym = open_rings.pop(label)
                if sym is not None and pending is not None and sym != pending:
                    raise SmilesSyntaxError(f"conflicting ring bond symbols at position {i}")
                add_edge(other, prev, pending if pending is not None else sym, i)
            else:
                open_rings[label] = (prev, pending)
            pending = None
            i += width
        elif ch == "*":
            raise UnknownAtomSymbol(f"wildcard atom at position {i}")
        else:
            raise UnknownAtomSymbol(f"unexpected character {ch!r} at position {i}")

    if branch_stack:
        raise UnbalancedParenthesis("unclosed branch")
    if open_rings:
        raise UnclosedRing(f"unclosed ring label(s) {sorted(open_rings)}")
    if pending is not None:
        raise SmilesSyntaxError("SMILES ends with a bond symbol")

    n_atoms = len(atom_kwargs)
    aromatic = [kw.get("aromatic", False) for kw in atom_kwargs]
    orders = []
    for a, b, sym in edges:
        if sym is None:
            order = BondOrder.AROMATIC if aromatic[a] and aromatic[b] else BondOrder.SINGLE
        else:
            order = _BOND_SYMBOLS[sym]
            if order == BondOrder.AROMATIC and not (aromatic[a] and aromatic[b]):
                raise SmilesSyntaxError(f"aromatic bond between non-aromatic atoms {a}-{b}")
        orders.append(order)

    pair_edges = [(a, b) for a, b, _ in edges]
    ring_edges = _ring_bonds(n_atoms, pair_edges)
    bonds = tuple(Bond(a, b, orders[k], k in ring_edges) for k, (a, b) in enumerate(pair_edges))

    nonarom = [0] * n_atoms
    n_arom = [0] * n_atoms
    ring_member = [False] * n_atoms
    for bond in bonds:
        for end in (bond.a, bond.b):
            if bond.order == BondOrder.AROMATIC:
                n_arom[end] += 1
            else:
                nonarom[end] += int(bond.order)
            if bond.in_ring:
                ring_member[end] = True

    atoms = []
    for k, kw in enumerate(atom_kwargs):
        implicit = 0
        if "explicit_h" not in kw:
            implicit = _implicit_h(kw["element"], kw.get("aromatic", False), nonarom[k], n_arom[k])
        atoms.append(Atom(ring_member=ring_member[k], implicit_h=implicit, **kw))

    valence_error = None
    for k, atom in enumerate(atoms):
        if not _valence_ok(atom, nonarom[k], n_arom[k]):
            valence_error = k
            break

    return Molecule(
        atoms=tuple(atoms),
        bonds=bonds,
        fragment_count=_count_components(n_atoms, pair_edges),
        source_smiles=text,
        valence_error=valence_error,
    )


def validate_valence(mol):
    """Raise :class:`ValenceViolation` for the first over/under-valent atom."""
    if mol.valence_error is not None:
        raise ValenceViolation(mol.valence_error)


# --- writer ----------------------------------------------------------------

def _atom_token(atom):
    sym = atom.symbol
    if atom.aromatic:
        sym = sym.lower()
    if not atom.bracketed:
        return sym
    out = "["
    if atom.isotope is not None:
        out += str(atom.isotope)
    out += sym
    if atom.explicit_h:
        out += "H" if atom.explicit_h == 1 else f"H{atom.explicit_h}"
    if atom.formal_charge:
        sign = "+" if atom.formal_charge > 0 else "-"
        mag = abs(atom.formal_charge)
        out += sign if mag == 1 else f"{sign}{mag}"
    return out + "]"


def _bond_token(mol, a, b, order):
    if order == BondOrder.DOUBLE:
        return "="
    if order == BondOrder.TRIPLE:
        return "#"
    if order == BondOrder.SINGLE and mol.atoms[a].aromatic and mol.atoms[b].aromatic:
        return "-"
    return ""


def random_smiles(mol, rng):
    """Write a valid (non-canonical) SMILES for ``mol`` via a randomized DFS.

    ``rng`` is a :class:`random.Random`. Re-parsing the output yields the
    same graph up to atom order; used to test order invariance.
    """
    n = len(mol.atoms)
    adj = mol.adjacency
    visited = [False] * n
    children = [[] for _ in range(n)]
    closures = [[] for _ in range(n)]  # (partner, order, is_opening)
    seen_edges = set()

    roots = list(range(n))
    rng.shuffle(roots)
    order_roots = []
    for root in roots:
        if visited[root]:
            continue
        order_roots.append(root)
        visited[root] = True
        stack = [(root, None)]
        # Iterative DFS that discovers tree edges in visit order.
        iters = {}
        while stack:
            node, parent = stack[-1]
            if node not in iters:
                nbrs = list(adj[node])
                rng.shuffle(nbrs)
                iters[node] = iter(nbrs)
            for nbr, order in iters[node]:
                key = (min(node, nbr), max(node, nbr))
                if key in seen_edges:
                    continue
                seen_edges.add(key)
                if visited[nbr]:
                    closures[nbr].append((node, order, True))
                    closures[node].append((nbr, order, False))
                    continue
                visited[nbr] = True
                children[node].append((nbr, order))
                stack.append((nbr, node))
                break
            else:
                stack.pop()

    free_labels = list(range(1, 100))
    assigned = {}

    def label_text(label):
        return str(label) if label < 10 else f"%{label}"

    out = []

    def emit(node):
        # Iterative emission: work items are atoms or literal strings.
        work = [node]
        while work:
            item = work.pop()
            if isinstance(item, str):
                out.append(item)
                continue
            u = item
            out.append(_atom_token(mol.atoms[u]))
            for partner, order, opening in closures[u]:
                key = (min(u, partner), max(u, partner))
                if key in assigned:
                    label = assigned.pop(key)
                    out.append(label_text(label))
                    free_labels.append(label)
                    free_labels.sort()
                else:
                    label = free_labels.pop(0)
                    assigned[key] = label
                    out.append(_bond_token(mol, u, partner, order) + label_text(label))
            kids = children[u]
            pending_items = []
            for k, (v, order) in enumerate(kids):
                bond = _bond_token(mol, u, v, order)
                if k < len(kids) - 1:
                    pending_items.extend(["(" + bond, v, ")"])
                else:
                    pending_items.extend([bond, v])
            work.extend(reversed(pending_items))

    for k, root in enumerate(order_roots):
        if k:
            out.append(".")
        emit(root)
    return "".join(out)
