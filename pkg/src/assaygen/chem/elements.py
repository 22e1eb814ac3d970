"""Element symbols and valence rules used by the SMILES reader."""

from __future__ import annotations

SYMBOLS = ["H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"]

ATOMIC_NUMBER = {sym: i + 1 for i, sym in enumerate(SYMBOLS)}
ATOMIC_NUMBER["*"] = 0

ORGANIC_SUBSET = frozenset({"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"})
AROMATIC_ORGANIC = frozenset({"b", "c", "n", "o", "p", "s"})
AROMATIC_BRACKET = frozenset({"b", "c", "n", "o", "p", "s", "se", "as", "te"})

# allowed valences of neutral atoms
VALENCES: dict[str, tuple[int, ...]] = {
    "H": (1,),
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "F": (1,),
    "Si": (4,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "Cl": (1,),
    "Ge": (4,),
    "As": (3, 5),
    "Se": (2, 4, 6),
    "Br": (1,),
    "Sn": (2, 4),
    "Te": (2, 4, 6),
    "I": (1, 3, 5),
    "Al": (3,),
}

# upper valence bound for charged atoms, keyed by (element, charge)
_CHARGED_MAX: dict[str, dict[int, int]] = {
    "B": {-2: 3, -1: 4, 1: 2},
    "C": {-2: 2, -1: 3, 1: 3, 2: 2},
    "N": {-2: 1, -1: 2, 1: 4, 2: 3, 3: 2},
    "O": {-2: 0, -1: 1, 1: 3, 2: 4, 3: 3},
    "F": {-1: 0, 1: 2, 2: 3, 3: 4},
    "Si": {-2: 6, -1: 5, 1: 3},
    "P": {-2: 3, -1: 6, 1: 4, 2: 3},
    "S": {-2: 4, -1: 5, 1: 5, 2: 4, 3: 3},
    "Cl": {-1: 0, 1: 6, 2: 5, 3: 4},
    "Se": {-2: 4, -1: 5, 1: 5, 2: 4, 3: 3},
    "Br": {-1: 0, 1: 6, 2: 5, 3: 4},
    "I": {-2: 1, -1: 6, 1: 6, 2: 5, 3: 4},
    "As": {-2: 3, -1: 6, 1: 4, 2: 3},
    "Te": {-2: 6, -1: 5, 1: 5, 2: 4, 3: 3},
    "Al": {-2: 5, -1: 4, 3: 0},
    "Ge": {-2: 6, -1: 5, 1: 3},
    "Sn": {-2: 6, -1: 5, 1: 3},
    "H": {-1: 0, 1: 0},
}


def max_valence(element: str, charge: int = 0) -> int | None:
    """Largest permitted total valence, or None when the element is unrestricted."""
    if charge == 0:
        vals = VALENCES.get(element)
        return max(vals) if vals else None
    table = _CHARGED_MAX.get(element)
    if table is None:
        return None
    return table.get(charge)


def allowed_valences(element: str, charge: int = 0) -> tuple[int, ...] | None:
    """Valence states for an element/charge, shifting along the isoelectronic series."""
    if charge == 0:
        return VALENCES.get(element)
    z = ATOMIC_NUMBER.get(element, 0)
    iso = z - charge
    if 1 <= iso <= len(SYMBOLS) and element in _CHARGED_MAX:
        vals = VALENCES.get(SYMBOLS[iso - 1])
        top = max_valence(element, charge)
        if vals and top is not None:
            kept = tuple(v for v in vals if v <= top)
            return kept or (top,)
    top = max_valence(element, charge)
    return (top,) if top is not None else None
