"""SMILES parsing and physicochemical descriptors."""

from .descriptors import (
    Descriptors,
    aromatic_proportion,
    clogp,
    compute_descriptors,
    esol_logs,
    hba_count,
    hbd_count,
    molecular_weight,
    ring_count,
    rotatable_bond_count,
)
from .library import DuplicateId, LibraryFormatError, read_library, write_library
from .smiles import (
    Atom,
    Bond,
    BondOrder,
    EmptyInput,
    InvalidMolecule,
    Molecule,
    SmilesError,
    SmilesSyntaxError,
    UnbalancedParenthesis,
    UnclosedRing,
    UnknownAtomSymbol,
    ValenceViolation,
    parse_smiles,
    random_smiles,
    validate_valence,
)

__all__ = [
    "Atom", "Bond", "BondOrder", "Descriptors", "DuplicateId", "EmptyInput",
    "InvalidMolecule", "LibraryFormatError", "Molecule", "SmilesError",
    "SmilesSyntaxError", "UnbalancedParenthesis", "UnclosedRing", "UnknownAtomSymbol",
    "ValenceViolation", "aromatic_proportion", "clogp", "compute_descriptors",
    "esol_logs", "hba_count", "hbd_count", "molecular_weight", "parse_smiles",
    "random_smiles", "read_library", "ring_count", "rotatable_bond_count",
    "validate_valence", "write_library",
]
