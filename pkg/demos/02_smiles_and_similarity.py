"""
SMILES, canonical form and fingerprint similarity
==================================================

The chemistry layer is pure Python: a SMILES parser with valence and
aromaticity checks, a canonical writer, and Morgan-style fingerprints.
This tour shows what each piece reports on a handful of familiar drugs.
"""

# %%
# Parse and canonicalize.  Different spellings of one molecule meet at one string.
import random

from assaygen.chem import (
    SmilesError,
    canonicalize,
    diversity,
    morgan_fingerprint,
    parse_smiles,
    random_smiles,
    tanimoto,
)

paracetamol = parse_smiles("CC(=O)Nc1ccc(O)cc1")
print(paracetamol.canonical_smiles, paracetamol.heavy_atom_count, "heavy atoms")

rng = random.Random(0)
spellings = {random_smiles(paracetamol, rng) for _ in range(8)}
for s in sorted(spellings):
    print(f"  {s:<24} -> {canonicalize(s)}")

# %%
# Invalid strings raise a ``SmilesError`` subclass naming what went wrong.
for bad in ("C1CC(N", "c1cccc1", "C(C)(C)(C)(C)C", "CC)"):
    try:
        parse_smiles(bad)
    except SmilesError as exc:
        print(f"{bad:<16} {type(exc).__name__}: {exc}")

# %%
# Fingerprints and Tanimoto similarity between a few analgesics.
drugs = {
    "paracetamol": "CC(=O)Nc1ccc(O)cc1",
    "phenacetin": "CCOc1ccc(NC(C)=O)cc1",
    "aspirin": "CC(=O)Oc1ccccc1C(=O)O",
    "ibuprofen": "CC(C)Cc1ccc(C(C)C(=O)O)cc1",
}
fps = {k: morgan_fingerprint(parse_smiles(v)) for k, v in drugs.items()}
names = list(drugs)
print(" " * 12 + "".join(f"{n:>12}" for n in names))
for a in names:
    print(f"{a:<12}" + "".join(f"{tanimoto(fps[a], fps[b]):>12.3f}" for b in names))

# %%
# Diversity is one minus the mean pairwise similarity.
print(f"diversity of the four: {diversity(list(fps.values())):.3f}")
print(f"diversity of four copies: {diversity([fps['aspirin']] * 4):.3f}")
