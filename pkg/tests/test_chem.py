"""SMILES parsing, canonical form and fingerprints.

The reference verdicts in ``fixtures/smiles_validity.tsv`` were produced
offline by RDKit (see ``tools/make_smiles_fixtures.py``); they are the
independent oracle for validity and heavy-atom counts.
"""

from __future__ import annotations

import random
from itertools import combinations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from assaygen.chem import (
    AROMATIC,
    Fingerprint,
    SmilesError,
    SmilesSyntaxError,
    UnclosedRing,
    UnmatchedParen,
    ValenceError,
    canonicalize,
    diversity,
    morgan_fingerprint,
    parse_smiles,
    random_smiles,
    tanimoto,
)
from assaygen.chem.fingerprint import SizeMismatch, TooFew, pairwise_tanimoto

# -- parse_smiles ---------------------------------------------------------------


def test_ethanol_has_three_heavy_atoms():
    assert parse_smiles("CCO").heavy_atom_count == 3


def test_unclosed_ring_reports_digit():
    with pytest.raises(UnclosedRing) as exc:
        parse_smiles("C1CC")
    assert exc.value.digit == 1


def test_benzene_is_six_aromatic_carbons():
    mol = parse_smiles("c1ccccc1")
    assert [a.element for a in mol.atoms] == ["C"] * 6
    assert all(a.aromatic for a in mol.atoms)
    assert all(a.hydrogens == 1 for a in mol.atoms)
    assert all(b.order == AROMATIC for b in mol.bonds)


@pytest.mark.parametrize("text, error", [
    ("C(C", UnmatchedParen),
    ("CC)", UnmatchedParen),
    ("C=", SmilesSyntaxError),
    ("[C", SmilesSyntaxError),
    ("Q", SmilesSyntaxError),
    ("C%1", SmilesSyntaxError),
    ("C(C)(C)(C)(C)C", ValenceError),
    ("O=O=O", ValenceError),
    ("c1cccc1", ValenceError),
])
def test_declared_errors(text, error):
    with pytest.raises(error):
        parse_smiles(text)


@pytest.mark.parametrize("text, heavy", [
    ("[2H]C([2H])([2H])O", 2),      # isotopic hydrogens are not heavy atoms
    ("[H]OC([H])([H])[H]", 2),
    ("C[NH3+]", 2),
    ("[O-]C(=O)C", 4),
    ("C%12CCCCC%12", 6),
    ("C%(123)CC%(123)", 3),
    ("F/C=C/F", 4),
    ("N[C@@H](C)C(=O)O", 6),
    ("c1ccc2[nH]ccc2c1", 9),
    ("[Na+].[Cl-]", 2),
])
def test_accepted_forms_and_heavy_atoms(text, heavy):
    assert parse_smiles(text).heavy_atom_count == heavy


def test_stereo_and_isotope_do_not_change_canonical_form():
    assert canonicalize("F/C=C/F") == canonicalize("FC=CF")
    assert canonicalize("N[C@@H](C)C(=O)O") == canonicalize("NC(C)C(=O)O")


def test_agreement_with_reference_toolkit(validity_corpus):
    agree = 0
    for row in validity_corpus:
        try:
            mol = parse_smiles(row["smiles"])
            ok = 1
        except SmilesError:
            ok = 0
        agree += ok == int(row["rdkit_valid"])
        if ok and row["rdkit_valid"] == "1":
            assert mol.heavy_atom_count == int(row["rdkit_heavy_atoms"]), row["smiles"]
    assert agree / len(validity_corpus) >= 0.99


# -- canonical form -------------------------------------------------------------


def test_canonical_independent_of_writing_order():
    assert canonicalize(parse_smiles("OCC")) == canonicalize(parse_smiles("CCO"))


def test_canonical_is_idempotent_through_reparse():
    once = canonicalize("c1ccc(cc1)C(=O)Nc1ccncc1")
    assert canonicalize(once) == once


def test_kekule_and_aromatic_forms_agree():
    assert canonicalize("C1=CC=CC=C1") == canonicalize("c1ccccc1")
    assert canonicalize("Cn1cnc2c1c(=O)n(C)c(=O)n2C") == canonicalize("CN1C=NC2=C1C(=O)N(C)C(=O)N2C")


def test_round_trip_on_corpus(valid_smiles):
    for s in valid_smiles:
        c = canonicalize(s)
        assert canonicalize(c) == c, s


@given(st.integers(0, 10_000), st.sampled_from([
    "CC(=O)Oc1ccccc1C(=O)O", "CN1CCC[C@H]1c1cccnc1", "O=C(O)c1ccc2ccccc2c1", "C1CC2CCC1CC2",
    "c1ccc2c(c1)ccc1ccccc12", "OC1C(O)C(O)C(O)C(O)C1O",
]))
def test_random_renderings_share_one_canonical(seed, smiles):
    mol = parse_smiles(smiles)
    shuffled = random_smiles(mol, random.Random(seed))
    assert parse_smiles(shuffled).canonical_smiles == mol.canonical_smiles


# -- fingerprints --------------------------------------------------------------


def test_identical_molecules_identical_fingerprints():
    assert morgan_fingerprint(parse_smiles("CCO")) == morgan_fingerprint(parse_smiles("OCC"))


def test_methane_and_ethane_differ():
    assert morgan_fingerprint(parse_smiles("C")) != morgan_fingerprint(parse_smiles("CC"))


def test_benzene_bit_count_bound():
    fp = morgan_fingerprint(parse_smiles("c1ccccc1"), radius=2)
    assert fp.count() <= 3 * 6


def test_fingerprint_indices_in_range():
    fp = morgan_fingerprint(parse_smiles("CC(=O)Nc1ccc(O)cc1"), nbits=64)
    assert fp.set_bits and all(0 <= b < 64 for b in fp.set_bits)


def test_fingerprint_hex_round_trip():
    fp = morgan_fingerprint(parse_smiles("CC(=O)Nc1ccc(O)cc1"))
    assert Fingerprint.from_hex(fp.to_hex()) == fp
    assert len(fp.to_hex()) == 512


def test_tanimoto_examples():
    a = Fingerprint.from_indices([1, 2, 3], 16)
    b = Fingerprint.from_indices([2, 3, 4], 16)
    assert tanimoto(a, b) == 0.5
    assert tanimoto(a, a) == 1.0
    assert tanimoto(a, Fingerprint.from_indices([7, 8], 16)) == 0.0
    assert tanimoto(Fingerprint(16, 0), Fingerprint(16, 0)) == 1.0


def test_tanimoto_size_mismatch():
    with pytest.raises(SizeMismatch):
        tanimoto(Fingerprint(8, 1), Fingerprint(16, 1))


@given(st.sets(st.integers(0, 127)), st.sets(st.integers(0, 127)))
def test_tanimoto_matches_set_arithmetic(x, y):
    a, b = Fingerprint.from_indices(x, 128), Fingerprint.from_indices(y, 128)
    expected = 1.0 if not (x | y) else len(x & y) / len(x | y)
    assert tanimoto(a, b) == expected == tanimoto(b, a)


def test_diversity_examples():
    benzene = parse_smiles("c1ccccc1")
    assert diversity([benzene, benzene, benzene]) == 0.0
    disjoint = [Fingerprint.from_indices([0], 8), Fingerprint.from_indices([1], 8)]
    assert diversity(disjoint) == 1.0
    # pairwise similarities 0.5, 0.5, 1.0
    trio = [Fingerprint.from_indices([0, 1], 8), Fingerprint.from_indices([0], 8),
            Fingerprint.from_indices([0], 8)]
    assert sorted(pairwise_tanimoto(trio)) == [0.5, 0.5, 1.0]
    assert diversity(trio) == pytest.approx(1 - 2 / 3, abs=1e-12)


def test_diversity_needs_two():
    with pytest.raises(TooFew):
        diversity([parse_smiles("C")])


def test_diversity_equals_mean_over_unordered_pairs(valid_smiles):
    mols = [parse_smiles(s) for s in valid_smiles[:12]]
    fps = [morgan_fingerprint(m) for m in mols]
    sims = [tanimoto(a, b) for a, b in combinations(fps, 2)]
    assert diversity(mols) == pytest.approx(1 - sum(sims) / len(sims), abs=1e-12)
