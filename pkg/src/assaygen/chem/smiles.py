"""SMILES reader producing validated molecular graphs.

The grammar covers the organic subset, bracket atoms (isotope, chirality,
hydrogen count, charge, atom class), ring closures including ``%nn`` and
``%(nnn)``, branches, dot-disconnections and all bond symbols.  A string is
valid when it is grammatical, every ring closure and parenthesis is paired,
every atom respects its valence table, and the aromatic part admits a Kekulé
structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from . import rings
from .elements import (
    AROMATIC_BRACKET,
    AROMATIC_ORGANIC,
    ATOMIC_NUMBER,
    allowed_valences,
    max_valence,
)

AROMATIC = 1.5
_BOND_SYMBOLS = {"-": 1, "=": 2, "#": 3, "$": 4, ":": AROMATIC, "/": 1, "\\": 1}
_ELECTRONEGATIVE = frozenset({"N", "O", "S"})
_DIGITS = "0123456789"


class SmilesError(ValueError):
    """Base class for every parse or validation failure."""


class SmilesSyntaxError(SmilesError):
    def __init__(self, position: int, reason: str = "unexpected character"):
        self.position = position
        self.reason = reason
        super().__init__(f"{reason} at position {position}")


class UnclosedRing(SmilesError):
    def __init__(self, digit: int):
        self.digit = digit
        super().__init__(f"ring closure {digit} never closed")


class UnmatchedParen(SmilesError):
    def __init__(self, position: int):
        self.position = position
        super().__init__(f"unmatched parenthesis at position {position}")


class ValenceError(SmilesError):
    def __init__(self, atom_index: int, reason: str = "valence exceeded"):
        self.atom_index = atom_index
        self.reason = reason
        super().__init__(f"{reason} for atom {atom_index}")


class KekulizeError(ValenceError):
    """Aromatic atoms for which no alternating bond assignment exists."""

    def __init__(self, atom_index: int, reason: str = "cannot kekulize aromatic system"):
        super().__init__(atom_index, reason)


@dataclass(frozen=True)
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    isotope: int | None = None
    hydrogens: int = 0
    chirality: str | None = None
    atom_class: int | None = None

    @property
    def atomic_number(self) -> int:
        return ATOMIC_NUMBER[self.element]


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: float  # 1, 2, 3, 4 or AROMATIC
    stereo: str | None = None

    def other(self, i: int) -> int:
        return self.end if i == self.begin else self.begin


@dataclass(frozen=True, eq=False)
class Molecule:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    source: str | None = field(default=None, compare=False)

    @cached_property
    def neighbors(self) -> tuple[tuple[tuple[int, Bond], ...], ...]:
        adj: list[list[tuple[int, Bond]]] = [[] for _ in self.atoms]
        for b in self.bonds:
            adj[b.begin].append((b.end, b))
            adj[b.end].append((b.begin, b))
        return tuple(tuple(x) for x in adj)

    @property
    def heavy_atom_count(self) -> int:
        return sum(1 for a in self.atoms if a.element not in ("H", "*"))

    @cached_property
    def ring_bonds(self) -> frozenset[int]:
        return frozenset(rings.ring_edges(len(self.atoms), [(b.begin, b.end) for b in self.bonds]))

    @cached_property
    def canonical_smiles(self) -> str:
        from .canon import canonical_smiles

        return canonical_smiles(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Molecule):
            return NotImplemented
        return self.canonical_smiles == other.canonical_smiles

    def __hash__(self) -> int:
        return hash(self.canonical_smiles)

    def __repr__(self) -> str:
        return f"Molecule({self.canonical_smiles!r})"


# ---------------------------------------------------------------------------
# reader


@dataclass
class _RawAtom:
    element: str
    aromatic: bool
    bracket: bool
    charge: int = 0
    isotope: int | None = None
    hcount: int = 0
    chirality: str | None = None
    atom_class: int | None = None
    pos: int = 0


@dataclass
class _RawBond:
    a: int
    b: int
    order: float
    stereo: str | None = None
    explicit: bool = False


def _read_int(s: str, i: int) -> tuple[int | None, int]:
    j = i
    while j < len(s) and s[j] in _DIGITS:
        j += 1
    if j == i:
        return None, i
    return int(s[i:j]), j


def _parse_bracket(s: str, i: int) -> tuple[_RawAtom, int]:
    start = i
    i += 1  # '['
    isotope, i = _read_int(s, i)
    if i >= len(s):
        raise SmilesSyntaxError(i, "unterminated bracket atom")
    # element symbol
    element = None
    aromatic = False
    if s[i] == "*":
        element, i = "*", i + 1
    else:
        two = s[i:i + 2]
        if len(two) == 2 and two in ATOMIC_NUMBER and two != "*":
            element, i = two, i + 2
        elif two in AROMATIC_BRACKET:
            element, aromatic, i = two.capitalize(), True, i + 2
        elif s[i] in ATOMIC_NUMBER:
            element, i = s[i], i + 1
        elif s[i] in AROMATIC_BRACKET:
            element, aromatic, i = s[i].upper(), True, i + 1
        else:
            raise SmilesSyntaxError(i, "unknown element")
    chirality = None
    if i < len(s) and s[i] == "@":
        j = i + 1
        if j < len(s) and s[j] == "@":
            j += 1
        else:
            for tag in ("TH", "AL", "SP", "TB", "OH"):
                if s.startswith(tag, j):
                    n, j2 = _read_int(s, j + 2)
                    if n is None:
                        raise SmilesSyntaxError(j + 2, "chirality class needs a number")
                    j = j2
                    break
        chirality, i = s[i:j], j
    hcount = 0
    if i < len(s) and s[i] == "H":
        n, j = _read_int(s, i + 1)
        hcount = 1 if n is None else n
        i = j
    charge = 0
    if i < len(s) and s[i] in "+-":
        sign = 1 if s[i] == "+" else -1
        n, j = _read_int(s, i + 1)
        if n is not None:
            charge, i = sign * n, j
        else:
            j = i
            while j < len(s) and s[j] == s[i]:
                j += 1
            charge, i = sign * (j - i), j
    atom_class = None
    if i < len(s) and s[i] == ":":
        atom_class, j = _read_int(s, i + 1)
        if atom_class is None:
            raise SmilesSyntaxError(i + 1, "atom class needs a number")
        i = j
    if i >= len(s) or s[i] != "]":
        raise SmilesSyntaxError(i, "malformed bracket atom")
    return _RawAtom(element, aromatic, True, charge, isotope, hcount, chirality, atom_class, start), i + 1


def _read_ring_label(s: str, i: int) -> tuple[int, int]:
    if s[i] in _DIGITS:
        return int(s[i]), i + 1
    # '%'
    if i + 1 < len(s) and s[i + 1] == "(":
        n, j = _read_int(s, i + 2)
        if n is None or j >= len(s) or s[j] != ")":
            raise SmilesSyntaxError(i, "bad ring label")
        return n, j + 1
    two = s[i + 1:i + 3]
    if len(two) == 2 and two[0] in _DIGITS and two[1] in _DIGITS:
        return int(s[i + 1:i + 3]), i + 3
    raise SmilesSyntaxError(i, "bad ring label")


def _tokenize_graph(s: str) -> tuple[list[_RawAtom], list[_RawBond]]:
    atoms: list[_RawAtom] = []
    bonds: list[_RawBond] = []
    bonded: set[tuple[int, int]] = set()
    open_rings: dict[int, tuple[int, str | None, int]] = {}
    branch_stack: list[tuple[int, int]] = []
    prev: int | None = None
    pending: str | None = None
    pending_pos = 0
    after_dot = False
    after_open = False
    i = 0
    n = len(s)
    if n == 0:
        raise SmilesSyntaxError(0, "empty string")

    def add_bond(a: int, b: int, symbol: str | None, pos: int) -> None:
        key = (min(a, b), max(a, b))
        if a == b:
            raise SmilesSyntaxError(pos, "atom bonded to itself")
        if key in bonded:
            raise SmilesSyntaxError(pos, "duplicate bond")
        bonded.add(key)
        if symbol is None:
            order = AROMATIC if atoms[a].aromatic and atoms[b].aromatic else 1
            bonds.append(_RawBond(a, b, order))
        else:
            stereo = symbol if symbol in "/\\" else None
            bonds.append(_RawBond(a, b, _BOND_SYMBOLS[symbol], stereo, explicit=True))

    while i < n:
        c = s[i]
        if c == "[" or c in "BCNOPSFI*bcnops":
            if c == "[":
                atom, j = _parse_bracket(s, i)
            else:
                if s.startswith("Cl", i):
                    atom, j = _RawAtom("Cl", False, False, pos=i), i + 2
                elif s.startswith("Br", i):
                    atom, j = _RawAtom("Br", False, False, pos=i), i + 2
                elif c in AROMATIC_ORGANIC:
                    atom, j = _RawAtom(c.upper(), True, False, pos=i), i + 1
                else:
                    atom, j = _RawAtom(c, False, False, pos=i), i + 1
            atoms.append(atom)
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending, pending_pos)
            elif pending is not None:
                raise SmilesSyntaxError(pending_pos, "bond without preceding atom")
            pending = None
            prev = idx
            after_dot = after_open = False
            i = j
        elif c in _BOND_SYMBOLS:
            if pending is not None or prev is None:
                raise SmilesSyntaxError(i, "misplaced bond symbol")
            pending, pending_pos = c, i
            i += 1
        elif c in _DIGITS or c == "%":
            if prev is None or after_open:
                raise SmilesSyntaxError(i, "ring closure without atom")
            label, j = _read_ring_label(s, i)
            if label in open_rings:
                other, sym, _ = open_rings.pop(label)
                symbol = sym if sym is not None else pending
                add_bond(other, prev, symbol, i)
            else:
                open_rings[label] = (prev, pending, i)
            pending = None
            i = j
        elif c == "(":
            if prev is None or pending is not None:
                raise SmilesSyntaxError(i, "branch without atom")
            branch_stack.append((prev, i))
            after_open = True
            i += 1
        elif c == ")":
            if not branch_stack:
                raise UnmatchedParen(i)
            if pending is not None or after_open:
                raise SmilesSyntaxError(i, "empty branch or dangling bond")
            prev, _ = branch_stack.pop()
            i += 1
        elif c == ".":
            if prev is None or pending is not None or after_dot or branch_stack:
                raise SmilesSyntaxError(i, "misplaced dot")
            prev = None
            after_dot = True
            i += 1
        else:
            raise SmilesSyntaxError(i)
    if branch_stack:
        raise UnmatchedParen(branch_stack[-1][1])
    if open_rings:
        raise UnclosedRing(min(open_rings))
    if pending is not None:
        raise SmilesSyntaxError(pending_pos, "dangling bond")
    if after_dot:
        raise SmilesSyntaxError(n - 1, "trailing dot")
    return atoms, bonds


def _assign_hydrogens_and_kekulize(atoms: list[_RawAtom], bonds: list[_RawBond]) -> tuple[list[int], list[float]]:
    """Implicit hydrogens per atom and a Kekulé bond-order list."""
    edges = [(b.a, b.b) for b in bonds]
    ring = rings.ring_edges(len(atoms), edges)
    orders = [b.order for b in bonds]
    for k, b in enumerate(bonds):
        if b.order == AROMATIC and k not in ring:
            orders[k] = 1  # aromatic bond outside any ring, e.g. implicit biaryl link
    adj = rings.adjacency(len(atoms), edges)

    hyd = [0] * len(atoms)
    needs_pi: list[int] = []
    for i, a in enumerate(atoms):
        s = 0
        for _, k in adj[i]:
            s += 1 if orders[k] == AROMATIC else int(orders[k])
        if a.aromatic and not any(k in ring for _, k in adj[i]):
            raise KekulizeError(i, "non-ring atom marked aromatic")
        if a.aromatic and not any(bonds[k].order == AROMATIC for _, k in adj[i]):
            a.aromatic = False  # lone lowercase ring atom: read as aliphatic
        if a.aromatic:
            if a.bracket:
                tot = s + a.hcount
                top = max_valence(a.element, a.charge)
                if top is not None and tot > top:
                    raise ValenceError(i)
                vals = allowed_valences(a.element, a.charge) or ()
                fit = [v for v in vals if v >= tot]
                if fit and fit[0] > tot:
                    needs_pi.append(i)
                hyd[i] = a.hcount
            else:
                vals = allowed_valences(a.element) or ()
                fit = [v for v in vals if v >= s]
                if not fit:
                    raise ValenceError(i)
                if fit[0] - s >= 1:
                    needs_pi.append(i)
                    hyd[i] = fit[0] - s - 1
        elif a.bracket:
            top = max_valence(a.element, a.charge)
            if top is not None and s + a.hcount > top:
                raise ValenceError(i)
            hyd[i] = a.hcount
        elif a.element == "*":
            hyd[i] = 0
        else:
            vals = allowed_valences(a.element) or ()
            fit = [v for v in vals if v >= s]
            if not fit:
                if a.element == "N" and s == 5 and _has_double_to_oxygen(i, atoms, adj, orders):
                    # pentavalent nitro N: store the charge-separated form
                    j, k = min((j, k) for j, k in adj[i] if orders[k] == 2 and atoms[j].element == "O")
                    orders[k] = 1
                    a.charge, atoms[j].charge, atoms[j].bracket = 1, -1, True
                    hyd[i] = 0
                    continue
                raise ValenceError(i)
            hyd[i] = fit[0] - s

    if needs_pi:
        pi_set = set(needs_pi)
        pi_adj: dict[int, list[tuple[int, int]]] = {u: [] for u in needs_pi}
        for u in needs_pi:
            for v, k in adj[u]:
                if v in pi_set and orders[k] == AROMATIC:
                    pi_adj[u].append((v, k))
        # odd components cannot be perfectly matched
        seen: set[int] = set()
        for u in needs_pi:
            if u in seen:
                continue
            comp, stack = [], [u]
            seen.add(u)
            while stack:
                x = stack.pop()
                comp.append(x)
                for y, _ in pi_adj[x]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            if len(comp) % 2:
                raise KekulizeError(min(comp))
        match = rings.perfect_matching(needs_pi, pi_adj)
        if match is None:
            raise KekulizeError(min(needs_pi))
        doubles = set(match.values())
    else:
        doubles = set()
    for k, o in enumerate(orders):
        if o == AROMATIC:
            orders[k] = 2 if k in doubles else 1
    # bracket aromatic atoms still need a valence check once the pi bond is placed
    for i in needs_pi:
        a = atoms[i]
        if a.bracket:
            top = max_valence(a.element, a.charge)
            tot = sum(int(orders[k]) for _, k in adj[i]) + hyd[i]
            if top is not None and tot > top:
                raise ValenceError(i)
    return hyd, orders


def _has_double_to_oxygen(i, atoms, adj, orders) -> bool:
    return any(orders[k] == 2 and atoms[j].element == "O" for j, k in adj[i])


def perceive_aromaticity(elements: list[str], charges: list[int], hydrogens: list[int],
                         edges: list[tuple[int, int]], orders: list[float]) -> tuple[set[int], set[int]]:
    """Aromatic atoms and bonds of a Kekulé graph by the 4n+2 rule over simple cycles."""
    n = len(elements)
    ring = rings.ring_edges(n, edges)
    adj = rings.adjacency(n, edges)
    electrons: dict[int, int] = {}
    for i in range(n):
        e = _pi_electrons(i, elements, charges, hydrogens, adj, orders, ring)
        if e is not None:
            electrons[i] = e
    if len(electrons) < 3:
        return set(), set()
    ok_edges = {k for k in ring if edges[k][0] in electrons and edges[k][1] in electrons}
    nodes = {i for i in electrons if any(k in ok_edges for _, k in adj[i])}
    cycles = None
    for max_len in (rings.MAX_AROMATIC_CYCLE, 8, 6):
        try:
            cycles = rings.simple_cycles(nodes, adj, ok_edges, max_len=max_len)
            break
        except rings.CycleSearchTooLarge:
            continue
    arom_atoms: set[int] = set()
    arom_bonds: set[int] = set()
    for atoms_in, ekeys in cycles or ():
        total = sum(electrons[a] for a in atoms_in)
        if total % 4 == 2:
            arom_atoms.update(atoms_in)
            arom_bonds.update(ekeys)
    return arom_atoms, arom_bonds


def _pi_electrons(i, elements, charges, hydrogens, adj, orders, ring) -> int | None:
    el = elements[i]
    ch = charges[i]
    degree = len(adj[i]) + hydrogens[i]
    doubles = [(j, k) for j, k in adj[i] if orders[k] == 2]
    if any(orders[k] >= 3 for _, k in adj[i]) or len(doubles) > 1:
        return None
    if doubles:
        j, k = doubles[0]
        if k in ring:
            return 1 if el in ("C", "N", "P", "O", "S", "Se", "As", "B", "Te") else None
        if el == "C" and elements[j] in _ELECTRONEGATIVE and degree == 3:
            return 0
        return None
    if degree > 3:
        return None
    if el in ("N", "P", "As") and ch == 0 and degree == 3:
        return 2
    if el in ("O", "S", "Se", "Te") and ch == 0 and degree == 2:
        return 2
    if el == "N" and ch == -1 and degree == 2:
        return 2
    if el == "C" and ch == -1 and degree == 3:
        return 2
    if el == "B" and ch == 0 and degree == 3:
        return 0
    if el == "C" and ch == 1 and degree == 3:
        return 0
    return None


def parse_smiles(text: str) -> Molecule:
    """Parse and validate a SMILES string.

    Raises one of :class:`SmilesSyntaxError`, :class:`UnclosedRing`,
    :class:`UnmatchedParen` or :class:`ValenceError` (including its
    :class:`KekulizeError` subclass).
    """
    if not isinstance(text, str):
        raise TypeError("SMILES must be a string")
    raw_atoms, raw_bonds = _tokenize_graph(text)
    hyd, orders = _assign_hydrogens_and_kekulize(raw_atoms, raw_bonds)

    # fold plain explicit hydrogens into their heavy neighbour
    drop: set[int] = set()
    adj = rings.adjacency(len(raw_atoms), [(b.a, b.b) for b in raw_bonds])
    for i, a in enumerate(raw_atoms):
        if (a.element == "H" and a.isotope is None and a.charge == 0 and hyd[i] == 0
                and len(adj[i]) == 1):
            j, k = adj[i][0]
            if raw_atoms[j].element != "H" and orders[k] == 1:
                drop.add(i)
                hyd[j] += 1
    keep = [i for i in range(len(raw_atoms)) if i not in drop]
    remap = {old: new for new, old in enumerate(keep)}
    edges, kept_orders, stereo = [], [], []
    for k, b in enumerate(raw_bonds):
        if b.a in drop or b.b in drop:
            continue
        edges.append((remap[b.a], remap[b.b]))
        kept_orders.append(orders[k])
        stereo.append(b.stereo)
    elements = [raw_atoms[i].element for i in keep]
    charges = [raw_atoms[i].charge for i in keep]
    hydrogens = [hyd[i] for i in keep]
    arom_atoms, arom_bonds = perceive_aromaticity(elements, charges, hydrogens, edges, kept_orders)

    atoms = tuple(
        Atom(
            element=elements[n],
            aromatic=n in arom_atoms,
            charge=charges[n],
            isotope=raw_atoms[i].isotope,
            hydrogens=hydrogens[n],
            chirality=raw_atoms[i].chirality,
            atom_class=raw_atoms[i].atom_class,
        )
        for n, i in enumerate(keep)
    )
    bonds = tuple(
        Bond(a, b, AROMATIC if k in arom_bonds else kept_orders[k], stereo[k])
        for k, (a, b) in enumerate(edges)
    )
    return Molecule(atoms, bonds, source=text)


def is_valid_smiles(text: str) -> bool:
    try:
        parse_smiles(text)
    except SmilesError:
        return False
    return True
