"""Canonical atom ranking and SMILES writing.

Ranks come from iterative neighbourhood refinement.  Remaining ties are
broken by individualizing each candidate of the first tied class and
refining again; the lexicographically smallest string over all branches is
the canonical form, which makes the result independent of input atom order.
Atoms that are interchangeable by construction (same neighbours, same bond
orders) are only branched on once.
"""

from __future__ import annotations

import random
from collections.abc import Sequence

from .elements import AROMATIC_ORGANIC, ORGANIC_SUBSET, allowed_valences
from .smiles import AROMATIC, Molecule

MAX_LEAVES = 4096


def _bond_code(order: float) -> int:
    return 5 if order == AROMATIC else int(order)


def _initial_keys(mol: Molecule) -> list[tuple]:
    n_ring = [0] * len(mol.atoms)
    for k in mol.ring_bonds:
        n_ring[mol.bonds[k].begin] += 1
        n_ring[mol.bonds[k].end] += 1
    keys = []
    for i, a in enumerate(mol.atoms):
        nbrs = mol.neighbors[i]
        keys.append((
            a.atomic_number, a.element, a.isotope or 0, a.charge, a.hydrogens,
            len(nbrs), int(a.aromatic), n_ring[i],
            tuple(sorted(_bond_code(b.order) for _, b in nbrs)),
        ))
    return keys


def _dense(keys: Sequence) -> list[int]:
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _refine(ranks: list[int], nbr_codes: list[list[tuple[int, int]]]) -> list[int]:
    n_classes = len(set(ranks))
    while True:
        keys = [
            (ranks[i], tuple(sorted((ranks[j], c) for j, c in nbr_codes[i])))
            for i in range(len(ranks))
        ]
        new = _dense(keys)
        m = len(set(new))
        if m == n_classes:
            return new
        ranks, n_classes = new, m


def canonical_ranks(mol: Molecule) -> list[int]:
    """A single refined ranking (ties broken by first candidate); used for ordering only."""
    nbr_codes = [[(j, _bond_code(b.order)) for j, b in mol.neighbors[i]] for i in range(len(mol.atoms))]
    ranks = _refine(_dense(_initial_keys(mol)), nbr_codes)
    while len(set(ranks)) < len(ranks):
        cell = _first_tied_cell(ranks)
        ranks = _refine(_individualize(ranks, cell[0]), nbr_codes)
    return ranks


def _first_tied_cell(ranks: list[int]) -> list[int]:
    counts: dict[int, list[int]] = {}
    for i, r in enumerate(ranks):
        counts.setdefault(r, []).append(i)
    r = min(r for r, members in counts.items() if len(members) > 1)
    return counts[r]


def _individualize(ranks: list[int], atom: int) -> list[int]:
    return _dense([(r, 0 if i == atom else 1) for i, r in enumerate(ranks)])


def _twin_representatives(mol: Molecule, cell: list[int]) -> list[int]:
    seen: dict[tuple, int] = {}
    for i in cell:
        sig = tuple(sorted((j, _bond_code(b.order)) for j, b in mol.neighbors[i]))
        seen.setdefault(sig, i)
    return list(seen.values())


def canonical_smiles(mol: Molecule) -> str:
    if not mol.atoms:
        return ""
    nbr_codes = [[(j, _bond_code(b.order)) for j, b in mol.neighbors[i]] for i in range(len(mol.atoms))]
    start = _refine(_dense(_initial_keys(mol)), nbr_codes)
    best: str | None = None
    leaves = 0
    stack = [start]
    while stack:
        ranks = stack.pop()
        if len(set(ranks)) == len(ranks):
            leaves += 1
            s = write_smiles(mol, ranks)
            if best is None or s < best:
                best = s
            if leaves >= MAX_LEAVES:
                break
            continue
        cell = _first_tied_cell(ranks)
        for atom in _twin_representatives(mol, cell):
            stack.append(_refine(_individualize(ranks, atom), nbr_codes))
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# writer


def _bare_hydrogens(mol: Molecule, i: int) -> int | None:
    """Hydrogen count a reader would infer for atom ``i`` written without brackets."""
    a = mol.atoms[i]
    if a.element == "*":
        return 0
    s = 0
    for _, b in mol.neighbors[i]:
        s += 1 if b.order == AROMATIC else int(b.order)
    vals = allowed_valences(a.element) or ()
    fit = [v for v in vals if v >= s]
    if not fit:
        return None
    if a.aromatic:
        return fit[0] - s - 1 if fit[0] - s >= 1 else 0
    return fit[0] - s


def _atom_token(mol: Molecule, i: int) -> str:
    a = mol.atoms[i]
    symbol = a.element.lower() if a.aromatic else a.element
    organic = (symbol in AROMATIC_ORGANIC) if a.aromatic else (a.element in ORGANIC_SUBSET or a.element == "*")
    if organic and a.charge == 0 and a.isotope is None and _bare_hydrogens(mol, i) == a.hydrogens:
        return symbol
    out = ["["]
    if a.isotope is not None:
        out.append(str(a.isotope))
    out.append(symbol)
    if a.hydrogens:
        out.append("H" if a.hydrogens == 1 else f"H{a.hydrogens}")
    if a.charge:
        sign = "+" if a.charge > 0 else "-"
        out.append(sign if abs(a.charge) == 1 else f"{sign}{abs(a.charge)}")
    out.append("]")
    return "".join(out)


def _bond_token(mol: Molecule, a: int, b: int, order: float) -> str:
    if order == AROMATIC:
        return ""
    if order == 1:
        return "-" if mol.atoms[a].aromatic and mol.atoms[b].aromatic else ""
    return {2: "=", 3: "#", 4: "$"}[int(order)]


def _ring_label(n: int) -> str:
    return str(n) if n < 10 else f"%{n}" if n < 100 else f"%({n})"


def write_smiles(mol: Molecule, ranks: Sequence[int]) -> str:
    """Write ``mol`` as SMILES, starting each component at its lowest-ranked atom
    and visiting neighbours in rank order."""
    n = len(mol.atoms)
    visited = [False] * n
    children: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    # ring bonds per atom: (partner, order, opening?)
    ring_marks: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    visit_order: list[int] = []
    used_bond: set[int] = set()
    components: list[int] = []
    bond_index = {id(b): k for k, b in enumerate(mol.bonds)}

    # start each component at its lowest-ranked atom of minimal degree
    order = sorted(range(n), key=lambda i: (len(mol.neighbors[i]), ranks[i]))
    comp_seen: set[int] = set()
    roots: list[int] = []
    for i in order:
        if i in comp_seen:
            continue
        roots.append(i)
        todo = [i]
        comp_seen.add(i)
        while todo:
            x = todo.pop()
            for y, _ in mol.neighbors[x]:
                if y not in comp_seen:
                    comp_seen.add(y)
                    todo.append(y)
    roots.sort(key=lambda i: ranks[i])
    for root in roots:
        if visited[root]:
            continue
        components.append(root)
        visited[root] = True
        visit_order.append(root)
        stack = [(root, iter(sorted(mol.neighbors[root], key=lambda t: ranks[t[0]])))]
        while stack:
            u, it = stack[-1]
            for v, b in it:
                k = bond_index[id(b)]
                if k in used_bond:
                    continue
                used_bond.add(k)
                if visited[v]:
                    ring_marks[v].append((u, b.order))
                    ring_marks[u].append((v, b.order))
                    continue
                visited[v] = True
                visit_order.append(v)
                children[u].append((v, b.order))
                stack.append((v, iter(sorted(mol.neighbors[v], key=lambda t: ranks[t[0]]))))
                break
            else:
                stack.pop()

    position = {a: p for p, a in enumerate(visit_order)}
    free: list[int] = []
    next_label = 1
    open_label: dict[frozenset[int], int] = {}
    parts: list[str] = []
    for ci, root in enumerate(components):
        if ci:
            parts.append(".")
        work: list = [root]
        while work:
            item = work.pop()
            if isinstance(item, str):
                parts.append(item)
                continue
            u = item
            parts.append(_atom_token(mol, u))
            # closings first (partner already written), then openings, each by partner position
            marks = sorted(ring_marks[u], key=lambda t: (position[t[0]] > position[u], position[t[0]]))
            for v, order in marks:
                key = frozenset((u, v))
                if key in open_label:
                    label = open_label.pop(key)
                    parts.append(_ring_label(label))
                    free.append(label)
                    free.sort()
                else:
                    if free:
                        label = free.pop(0)
                    else:
                        label, next_label = next_label, next_label + 1
                    open_label[key] = label
                    parts.append(_bond_token(mol, u, v, order) + _ring_label(label))
            kids = children[u]
            for idx in range(len(kids) - 1, -1, -1):
                v, order = kids[idx]
                if idx == len(kids) - 1:
                    work.append(v)
                    work.append(_bond_token(mol, u, v, order))
                else:
                    work.append(")")
                    work.append(v)
                    work.append(_bond_token(mol, u, v, order))
                    work.append("(")
    return "".join(parts)


def random_smiles(mol: Molecule, rng: random.Random) -> str:
    """A valid SMILES for ``mol`` under a random atom ordering."""
    ranks = list(range(len(mol.atoms)))
    rng.shuffle(ranks)
    return write_smiles(mol, ranks)


def canonicalize(mol_or_smiles: Molecule | str) -> str:
    if isinstance(mol_or_smiles, str):
        from .smiles import parse_smiles

        mol_or_smiles = parse_smiles(mol_or_smiles)
    return mol_or_smiles.canonical_smiles
