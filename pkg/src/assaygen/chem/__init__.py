"""Molecule parsing, canonical SMILES, fingerprints and similarity."""

from .canon import canonical_smiles, canonicalize, random_smiles
from .fingerprint import Fingerprint, diversity, morgan_fingerprint, tanimoto
from .smiles import (
    AROMATIC,
    Atom,
    Bond,
    KekulizeError,
    Molecule,
    SmilesError,
    SmilesSyntaxError,
    UnclosedRing,
    UnmatchedParen,
    ValenceError,
    is_valid_smiles,
    parse_smiles,
)

__all__ = [
    "AROMATIC", "Atom", "Bond", "Fingerprint", "KekulizeError", "Molecule", "SmilesError",
    "SmilesSyntaxError", "UnclosedRing", "UnmatchedParen", "ValenceError", "canonical_smiles",
    "canonicalize", "diversity", "is_valid_smiles", "morgan_fingerprint", "parse_smiles",
    "random_smiles", "tanimoto",
]
