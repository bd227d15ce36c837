"""Physicochemical descriptors used by the screening filter cascade."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

from .crippen import crippen_logp
from .elements import WEIGHTS
from .smiles import BondOrder

logger = logging.getLogger(__name__)

# Delaney (2004) ESOL coefficients.
ESOL_INTERCEPT = 0.16
ESOL_CLOGP = -0.63
ESOL_MW = -0.0062
ESOL_RB = 0.066
ESOL_AP = -0.74


def _atom_mass(atom):
    if atom.isotope is not None:
        return float(atom.isotope)
    return WEIGHTS[atom.element]


def molecular_weight(mol):
    """Average molecular weight in Da, hydrogens included."""
    mol.require_valid()
    h = WEIGHTS[1]
    return sum(_atom_mass(a) + a.own_h * h for a in mol.atoms)


def hbd_count(mol):
    """Lipinski donors: N or O atoms carrying at least one hydrogen."""
    mol.require_valid()
    return sum(1 for i, a in enumerate(mol.atoms)
               if a.element in (7, 8) and mol.total_h(i) > 0)


def hba_count(mol):
    """Lipinski acceptors: every N or O atom."""
    mol.require_valid()
    return sum(1 for a in mol.atoms if a.element in (7, 8))


def rotatable_bond_count(mol):
    """Acyclic single bonds between two atoms of heavy degree >= 2.

    No amide exclusion.
    """
    mol.require_valid()
    count = 0
    for bond in mol.bonds:
        if bond.order != BondOrder.SINGLE or bond.in_ring:
            continue
        if mol.atoms[bond.a].element == 1 or mol.atoms[bond.b].element == 1:
            continue
        if mol.heavy_degree(bond.a) >= 2 and mol.heavy_degree(bond.b) >= 2:
            count += 1
    return count


def ring_count(mol):
    """Cyclomatic number: bonds - atoms + fragments."""
    return len(mol.bonds) - len(mol.atoms) + mol.fragment_count


def aromatic_proportion(mol):
    heavy = mol.heavy_indices
    if not heavy:
        return 0.0
    return sum(1 for i in heavy if mol.atoms[i].aromatic) / len(heavy)


def clogp(mol):
    """Wildman-Crippen cLogP. Untyped atoms contribute 0.0 and are logged."""
    mol.require_valid()
    result = crippen_logp(mol)
    if result.untyped:
        logger.debug("untyped atoms %s in %s", result.untyped, mol.source_smiles)
    return result.logp


def esol_from_terms(clogp_value, mw, rb, ap):
    return (ESOL_INTERCEPT + ESOL_CLOGP * clogp_value + ESOL_MW * mw
            + ESOL_RB * rb + ESOL_AP * ap)


def esol_logs(mol):
    """Delaney ESOL estimate of log10 aqueous solubility (mol/L)."""
    return esol_from_terms(clogp(mol), molecular_weight(mol),
                           rotatable_bond_count(mol), aromatic_proportion(mol))


@dataclass(frozen=True)
class Descriptors:
    mw: float
    clogp: float
    hbd: int
    hba: int
    rotatable_bonds: int
    rings: int
    aromatic_proportion: float
    esol: float
    clogp_untyped: bool = False

    def as_dict(self):
        return asdict(self)


def compute_descriptors(mol):
    """All filter descriptors in one pass."""
    mol.require_valid()
    crip = crippen_logp(mol)
    mw = molecular_weight(mol)
    rb = rotatable_bond_count(mol)
    ap = aromatic_proportion(mol)
    return Descriptors(
        mw=mw,
        clogp=crip.logp,
        hbd=hbd_count(mol),
        hba=hba_count(mol),
        rotatable_bonds=rb,
        rings=ring_count(mol),
        aromatic_proportion=ap,
        esol=esol_from_terms(crip.logp, mw, rb, ap),
        clogp_untyped=bool(crip.untyped),
    )
