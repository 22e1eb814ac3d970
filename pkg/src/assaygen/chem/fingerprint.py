"""Circular (Morgan/ECFP-style) fingerprints, Tanimoto similarity and set diversity."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from itertools import combinations

from .smiles import AROMATIC, Molecule

DEFAULT_RADIUS = 2
DEFAULT_NBITS = 2048
_MASK = 0xFFFFFFFF


class SizeMismatch(ValueError):
    pass


class TooFew(ValueError):
    pass


def _combine(seed: int, value: int) -> int:
    # boost::hash_combine on 32-bit words
    seed ^= (value + 0x9E3779B9 + ((seed << 6) & _MASK) + (seed >> 2)) & _MASK
    return seed & _MASK


def _hash_seq(values: Iterable[int]) -> int:
    h = 0
    for v in values:
        h = _combine(h, v & _MASK)
    return h


@dataclass(frozen=True)
class Fingerprint:
    nbits: int
    bits: int  # bitset packed into an int

    @classmethod
    def from_indices(cls, indices: Iterable[int], nbits: int = DEFAULT_NBITS) -> Fingerprint:
        b = 0
        for i in indices:
            if not 0 <= i < nbits:
                raise ValueError(f"bit index {i} outside [0, {nbits})")
            b |= 1 << i
        return cls(nbits, b)

    @property
    def set_bits(self) -> tuple[int, ...]:
        out, b, i = [], self.bits, 0
        while b:
            if b & 1:
                out.append(i)
            b >>= 1
            i += 1
        return tuple(out)

    def count(self) -> int:
        return self.bits.bit_count()

    def to_hex(self) -> str:
        width = (self.nbits + 3) // 4
        return format(self.bits, f"0{width}x")

    @classmethod
    def from_hex(cls, text: str, nbits: int = DEFAULT_NBITS) -> Fingerprint:
        return cls(nbits, int(text.strip(), 16))


def _atom_invariant(mol: Molecule, i: int, ring_atoms: set[int]) -> int:
    a = mol.atoms[i]
    degree = len(mol.neighbors[i])
    in_ring = i in ring_atoms
    return _hash_seq((
        a.atomic_number, degree, a.hydrogens, a.charge & _MASK, (a.isotope or 0), int(in_ring),
    ))


def _bond_invariant(order: float) -> int:
    return 4 if order == AROMATIC else int(order)


def morgan_environments(mol: Molecule, radius: int = DEFAULT_RADIUS) -> list[tuple[int, int, int]]:
    """Unique circular environments as ``(hash, radius, centre atom)`` triples.

    An environment whose covered bond set duplicates an earlier one (same or
    smaller radius) is dropped, as is customary for ECFP.
    """
    n = len(mol.atoms)
    bond_idx = {id(b): k for k, b in enumerate(mol.bonds)}
    ring_atoms = {x for k in mol.ring_bonds for x in (mol.bonds[k].begin, mol.bonds[k].end)}
    current = [_atom_invariant(mol, i, ring_atoms) for i in range(n)]
    envs: list[tuple[int, int, int]] = [(current[i], 0, i) for i in range(n)]
    covered: list[frozenset[int]] = [frozenset() for _ in range(n)]
    seen_sets: set[frozenset[int]] = set()
    for r in range(1, radius + 1):
        new_hash: list[int] = []
        new_cov: list[frozenset[int]] = []
        for i in range(n):
            nbrs = sorted((_bond_invariant(b.order), current[j]) for j, b in mol.neighbors[i])
            flat = [r, current[i]]
            for bi, h in nbrs:
                flat.extend((bi, h))
            new_hash.append(_hash_seq(flat))
            cov = set(covered[i])
            for j, b in mol.neighbors[i]:
                cov.add(bond_idx[id(b)])
                cov |= covered[j]
            new_cov.append(frozenset(cov))
        # among duplicates within this round keep the smallest hash
        candidates = sorted(
            ((new_cov[i], new_hash[i], i) for i in range(n) if new_cov[i]),
            key=lambda t: (t[1], t[2]),
        )
        for cov, h, i in candidates:
            if cov in seen_sets:
                continue
            seen_sets.add(cov)
            envs.append((h, r, i))
        current, covered = new_hash, new_cov
    return envs


def morgan_fingerprint(mol: Molecule, radius: int = DEFAULT_RADIUS, nbits: int = DEFAULT_NBITS) -> Fingerprint:
    """Circular fingerprint over radii ``0..radius`` folded to ``nbits`` bits."""
    if radius < 0 or nbits <= 0:
        raise ValueError("radius must be >= 0 and nbits > 0")
    bits = 0
    for h, _, _ in morgan_environments(mol, radius):
        bits |= 1 << (h % nbits)
    return Fingerprint(nbits, bits)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    if a.nbits != b.nbits:
        raise SizeMismatch(f"{a.nbits} != {b.nbits}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


def pairwise_tanimoto(fps: Sequence[Fingerprint]) -> list[float]:
    return [tanimoto(x, y) for x, y in combinations(fps, 2)]


def diversity(mols: Sequence[Molecule | Fingerprint], radius: int = DEFAULT_RADIUS,
              nbits: int = DEFAULT_NBITS) -> float:
    """One minus the mean Tanimoto similarity over all unordered pairs."""
    if len(mols) < 2:
        raise TooFew("diversity needs at least two molecules")
    fps = [m if isinstance(m, Fingerprint) else morgan_fingerprint(m, radius, nbits) for m in mols]
    sims = pairwise_tanimoto(fps)
    return 1.0 - sum(sims) / len(sims)
