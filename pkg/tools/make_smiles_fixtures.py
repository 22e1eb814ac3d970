"""Regenerate the SMILES oracle fixtures under tests/fixtures/ using RDKit.

Development-only: RDKit is not a runtime dependency.  The verdicts written
here are committed so the test-suite runs without it.

    python tools/make_smiles_fixtures.py
"""

from __future__ import annotations

import csv
import random
from pathlib import Path

import rdkit
from rdkit import Chem, RDLogger

RDLogger.DisableLog("rdApp.*")

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "tests" / "fixtures"
CONTRIB = Path(rdkit.__file__).parent / "Contrib"


def load_sources() -> list[str]:
    smiles: list[str] = []
    for rel in ("mmpa/data/sample.smi", "fraggle/data/ChEMBL_11265_actives.smi",
                "FreeWilson/data/CHEMBL2321810.smi"):
        for line in (CONTRIB / rel).read_text().splitlines():
            if line.strip():
                smiles.append(line.split()[0])
    for line in (CONTRIB / "Fastcluster/cdk2.smi").read_text().splitlines():
        parts = line.split()
        if len(parts) == 2:
            smiles.append(parts[1])
    rows = (CONTRIB / "SA_Score/data/zim.100.txt").read_text().splitlines()[1:]
    smiles.extend(r.split()[0] for r in rows if r.strip())
    for rel in ("FreeWilson/data/cmet_ligands.sdf", "PBF/testData/egfr.sdf"):
        for m in Chem.SDMolSupplier(str(CONTRIB / rel)):
            if m is not None:
                smiles.append(Chem.MolToSmiles(m))
    # dedupe, keep order
    seen, out = set(), []
    for s in smiles:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


ALPHABET = list("CNOScnos()=#123[]+-H%@/\\.") + ["Cl", "Br", "F", "[nH]", "c1", "N1"]


def mutate(s: str, rng: random.Random) -> str:
    kind = rng.randrange(9)
    i = rng.randrange(len(s))
    if kind == 0:  # delete one character
        return s[:i] + s[i + 1:]
    if kind == 1:  # insert a token
        return s[:i] + rng.choice(ALPHABET) + s[i:]
    if kind == 2:  # substitute
        return s[:i] + rng.choice(ALPHABET) + s[i + 1:]
    if kind == 3 and len(s) > 2:  # swap neighbours
        i = min(i, len(s) - 2)
        return s[:i] + s[i + 1] + s[i] + s[i + 2:]
    if kind == 4 and "[nH]" in s:  # drop pyrrole hydrogen
        return s.replace("[nH]", "n", 1)
    if kind == 5:  # over-substitute an aliphatic carbon
        idx = [k for k, ch in enumerate(s) if ch == "C" and s[k + 1:k + 2] != "l"]
        if idx:
            k = rng.choice(idx)
            return s[:k + 1] + "(C)(C)" + s[k + 1:]
    if kind == 6:  # lowercase a carbon
        idx = [k for k, ch in enumerate(s) if ch == "C" and s[k + 1:k + 2] != "l"]
        if idx:
            k = rng.choice(idx)
            return s[:k] + "c" + s[k + 1:]
    if kind == 7:  # truncate (typical of cut-off model output)
        return s[: max(1, i)]
    return s + rng.choice(["1", ")", "(", "=", "C1", "c"])


def main() -> None:
    rng = random.Random(20240517)
    sources = [s for s in load_sources() if Chem.MolFromSmiles(s) is not None]
    rng.shuffle(sources)
    valid_part = sources[:250]
    mutated: list[str] = []
    seen = set(valid_part)
    while len(mutated) < 250:
        m = mutate(rng.choice(sources), rng)
        if m and m not in seen:
            seen.add(m)
            mutated.append(m)
    corpus = valid_part + mutated
    with open(OUT / "smiles_validity.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["smiles", "rdkit_valid", "rdkit_heavy_atoms"])
        for s in corpus:
            m = Chem.MolFromSmiles(s)
            w.writerow([s, int(m is not None), "" if m is None else m.GetNumHeavyAtoms()])

    # atom-order permutations: 50 molecules x 100 random renderings (half Kekulé form)
    pool = [s for s in valid_part if "." not in s and Chem.MolFromSmiles(s).GetNumHeavyAtoms() >= 12]
    chosen = pool[:50]
    with open(OUT / "permutations.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["group", "smiles"])
        for g, s in enumerate(chosen):
            mol = Chem.MolFromSmiles(s)
            Chem.Kekulize(mol, clearAromaticFlags=False)
            rendered: list[str] = []
            for k in range(100):
                kek = k % 2 == 1
                rendered.append(Chem.MolToSmiles(mol, doRandom=True, canonical=False, kekuleSmiles=kek))
            for r in rendered:
                w.writerow([g, r])
    print(f"validity corpus: {len(corpus)} ({sum(Chem.MolFromSmiles(s) is not None for s in corpus)} valid)")
    print(f"permutation groups: {len(chosen)}")


if __name__ == "__main__":
    main()
