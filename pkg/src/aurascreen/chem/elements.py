"""Element table: symbols, atomic numbers, standard atomic weights and valences.

Weights are IUPAC 2021 abridged standard atomic weights rounded to three
decimal places.
"""

# symbol -> (atomic number, standard atomic weight)
ELEMENTS = {
    "H": (1, 1.008),
    "He": (2, 4.003),
    "Li": (3, 6.94),
    "Be": (4, 9.012),
    "B": (5, 10.81),
    "C": (6, 12.011),
    "N": (7, 14.007),
    "O": (8, 15.999),
    "F": (9, 18.998),
    "Ne": (10, 20.180),
    "Na": (11, 22.990),
    "Mg": (12, 24.305),
    "Al": (13, 26.982),
    "Si": (14, 28.085),
    "P": (15, 30.974),
    "S": (16, 32.06),
    "Cl": (17, 35.45),
    "Ar": (18, 39.95),
    "K": (19, 39.098),
    "Ca": (20, 40.078),
    "Sc": (21, 44.956),
    "Ti": (22, 47.867),
    "V": (23, 50.942),
    "Cr": (24, 51.996),
    "Mn": (25, 54.938),
    "Fe": (26, 55.845),
    "Co": (27, 58.933),
    "Ni": (28, 58.693),
    "Cu": (29, 63.546),
    "Zn": (30, 65.38),
    "Ga": (31, 69.723),
    "Ge": (32, 72.630),
    "As": (33, 74.922),
    "Se": (34, 78.971),
    "Br": (35, 79.904),
    "Kr": (36, 83.798),
    "Rb": (37, 85.468),
    "Sr": (38, 87.62),
    "Ag": (47, 107.868),
    "Cd": (48, 112.414),
    "Sn": (50, 118.710),
    "Sb": (51, 121.760),
    "Te": (52, 127.60),
    "I": (53, 126.904),
    "Xe": (54, 131.293),
    "Cs": (55, 132.905),
    "Ba": (56, 137.327),
    "Pt": (78, 195.084),
    "Au": (79, 196.967),
    "Hg": (80, 200.592),
    "Pb": (82, 207.2),
    "Bi": (83, 208.980),
}

SYMBOLS = {z: sym for sym, (z, _) in ELEMENTS.items()}
WEIGHTS = {z: w for (z, w) in ELEMENTS.values()}

# Atoms that may appear outside brackets.
ORGANIC_SUBSET = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC_SYMBOLS = {"b": "B", "c": "C", "n": "N", "o": "O", "p": "P", "s": "S",
                    "se": "Se", "as": "As"}

# Allowed neutral valences, lowest first.
VALENCES = {
    1: (1,),
    5: (3,),
    6: (4,),
    7: (3,),
    8: (2,),
    9: (1,),
    15: (3, 5),
    16: (2, 4, 6),
    17: (1,),
    35: (1,),
    53: (1,),
}


def atomic_number(symbol):
    try:
        return ELEMENTS[symbol][0]
    except KeyError:
        raise KeyError(symbol) from None


def allowed_valences(element, charge):
    """Valences permitted for ``element`` carrying formal ``charge``.

    Returns None for elements without a valence model (metals, noble gases),
    which are never flagged, and an empty tuple when the charge leaves no
    valid valence. Charged atoms shift isoelectronically: cationic
    N/O/P/S/halogens gain one bond per unit charge (N+ behaves like C), anions
    lose one; carbon loses one per unit of either sign; boron anions gain.
    """
    base = VALENCES.get(element)
    if base is None:
        return None
    if charge == 0:
        return base
    if element == 6:
        shifted = tuple(v - abs(charge) for v in base)
    elif element == 5:
        shifted = tuple(v - charge for v in base)
    else:
        shifted = tuple(v + charge for v in base)
    return tuple(v for v in shifted if v >= 0)
