"""Small synthetic assay corpora, target lists and score files for offline runs.

Nothing here is real biology: the molecules come from the mock provider's
pool, outcomes and potencies are drawn from a seeded generator, and docking
scores are a deterministic function of the SMILES string.  The point is to
exercise every stage of the pipeline without network access or external tools.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .chem import SmilesError, parse_smiles


@dataclass(frozen=True)
class Family:
    gene: str
    uniprot: str
    name: str
    keywords: str


FAMILIES = (
    Family("GRK4", "P32298", "G protein-coupled receptor kinase 4", "serine/threonine kinase GPCR phosphorylation desensitization"),
    Family("GRK2", "P25098", "G protein-coupled receptor kinase 2", "serine/threonine kinase GPCR phosphorylation beta-adrenergic"),
    Family("GRK5", "P34947", "G protein-coupled receptor kinase 5", "serine/threonine kinase GPCR phosphorylation rhodopsin"),
    Family("EGFR", "P00533", "epidermal growth factor receptor", "tyrosine kinase ATP-site autophosphorylation"),
    Family("CDK2", "P24941", "cyclin-dependent kinase 2", "cell cycle kinase cyclin ATP-site"),
    Family("KCNH2", "Q12809", "hERG potassium channel", "potassium channel cardiac repolarization QT prolongation"),
    Family("DRD2", "P14416", "dopamine D2 receptor", "GPCR dopamine antagonist radioligand binding"),
    Family("ACHE", "P22303", "acetylcholinesterase", "cholinesterase hydrolase acetylcholine Ellman"),
)

_ASSAY_STYLES = (
    ("Inhibition of human {gene}", "IC50", "nM", "Enzymatic inhibition of recombinant human {name} ({gene}) measured by {kw}."),
    ("Binding affinity to {gene}", "Ki", "nM", "Displacement binding assay for {name} ({gene}); readout reflects {kw}."),
    ("Dissociation constant for {gene}", "Kd", "uM", "Surface plasmon resonance measurement against {name} ({gene}) covering {kw}."),
)


def _pool() -> list[str]:
    text = resources.files("assaygen").joinpath("data/mock_pool.smi").read_text(encoding="utf-8")
    return [line.split()[0] for line in text.splitlines() if line.strip()]


def make_corpus(n_assays: int = 60, seed: int = 0, counterscreen_rate: float = 0.15) -> list[dict[str, Any]]:
    """Assay documents in the ingestion JSON format."""
    rng = random.Random(seed)
    pool = _pool()
    docs = []
    for i in range(n_assays):
        fam = FAMILIES[i % len(FAMILIES)]
        title_t, kind, unit, desc_t = rng.choice(_ASSAY_STYLES)
        counter = rng.random() < counterscreen_rate
        description = desc_t.format(gene=fam.gene, name=fam.name, kw=fam.keywords)
        if counter:
            description += " Counterscreen for luciferase reporter interference; actives are likely artifacts."
        n_rows = rng.choice((4, 12, 20, 30, 40))
        rows = []
        for smi in rng.sample(pool, min(n_rows, len(pool))):
            outcome = rng.choices(("Active", "Inactive", "Unspecified", "Inconclusive"), (3, 5, 2, 1))[0]
            row: dict[str, Any] = {"smiles": smi, "outcome": outcome}
            if outcome != "Unspecified":
                value = round(10 ** rng.uniform(0.5, 4.5), 1) if outcome == "Active" else round(10 ** rng.uniform(3.5, 5.5))
                row.update(activity_kind=kind, relation=rng.choice(("=", "=", "=", "<", ">")), value=value, unit=unit)
            rows.append(row)
        if rng.random() < 0.2:
            rows.append({"smiles": "C1CC(N", "outcome": "Inactive"})  # unparsable deposit
        docs.append({
            "aid": 1000 + i,
            "title": title_t.format(gene=fam.gene),
            "description": description,
            "protocol": f"Compounds tested in dose response; {kind} reported in {unit}.",
            "comment": "Synthetic record for offline runs.",
            "targets": [{"uniprot_id": fam.uniprot, "gene_symbol": fam.gene, "organism": "Homo sapiens"}],
            "rows": rows,
        })
    return docs


def write_raw(directory: str | Path, docs: list[dict[str, Any]], csv_every: int = 3) -> Path:
    """Write documents as JSON files; every ``csv_every``-th keeps its table in a sibling CSV."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, doc in enumerate(docs):
        doc = dict(doc)
        if csv_every and i % csv_every == 0:
            with open(directory / f"{doc['aid']}.csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["SMILES", "OUTCOME", "KIND", "RELATION", "VALUE", "UNIT"])
                for r in doc.pop("rows"):
                    w.writerow([r["smiles"], r["outcome"], r.get("activity_kind", ""), r.get("relation", ""),
                                r.get("value", ""), r.get("unit", "")])
        (directory / f"aid_{doc['aid']}.json").write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return directory


@functools.lru_cache(maxsize=4096)
def mock_dock_score(smiles: str) -> float:
    """A deterministic stand-in docking score (kcal/mol) that grows more negative with size."""
    try:
        mol = parse_smiles(smiles)
        heavy, key = mol.heavy_atom_count, mol.canonical_smiles
    except SmilesError:
        heavy, key = 20, smiles
    jitter = int.from_bytes(hashlib.sha256(key.encode()).digest()[:4], "little") / 2**32
    return round(-3.0 - 0.2 * heavy - 1.5 * jitter, 3)


def candidate_smiles(docs: list[dict[str, Any]]) -> list[str]:
    """Every canonical SMILES the mock provider could emit for this corpus."""
    out: dict[str, None] = {}
    raw = dict.fromkeys(_pool() + [r["smiles"] for d in docs for r in d.get("rows", ())])
    for s in raw:
        try:
            out.setdefault(parse_smiles(s).canonical_smiles, None)
        except SmilesError:
            pass
    return list(out)


TARGETS = (
    ("grk4", "GRK4", ("G protein-coupled receptor kinase 4 (GRK4) is a serine/threonine kinase that phosphorylates "
     "agonist-occupied GPCRs, contributing to receptor desensitization; variants are linked to hypertension."), -9.0),
    ("egfr", "EGFR", ("Epidermal growth factor receptor (EGFR) is a receptor tyrosine kinase; ATP-site inhibitors "
     "block autophosphorylation and downstream signalling in carcinoma cells."), -8.5),
    ("ache", "ACHE", ("Acetylcholinesterase (ACHE) is a cholinesterase hydrolase terminating cholinergic signalling by "
     "hydrolysing acetylcholine at synapses."), -8.0),
)


def write_targets(directory: str | Path, docs: list[dict[str, Any]], n_baseline: int = 20,
                  seed: int = 0) -> Path:
    """Targets file plus per-target docking and baseline score files; returns the targets path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    smiles = candidate_smiles(docs)
    rng = random.Random(seed)
    lines = []
    for tid, gene, description, ref in TARGETS:
        fam = next(f for f in FAMILIES if f.gene == gene)
        score_path = directory / f"scores_{tid}.csv"
        with open(score_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["SMILES", "KIND", "VALUE"])
            for s in smiles:
                w.writerow([s, "vina_dock", mock_dock_score(s)])
        base_path = directory / f"baseline_{tid}.csv"
        with open(base_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["SMILES", "KIND", "VALUE"])
            for s in rng.sample(smiles, min(n_baseline, len(smiles))):
                w.writerow([s, "vina_dock", round(mock_dock_score(s) + 1.0, 3)])
        lines.append(json.dumps({
            "target_id": tid, "description": description, "excluded_uniprot_ids": [fam.uniprot],
            "reference_score": ref, "score_file": score_path.name, "baseline_file": base_path.name,
        }))
    path = directory / "targets.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_config(directory: str | Path, raw_dir: str | Path, seed: int = 0, **hyper: int) -> Path:
    """A mock-provider run configuration rooted at ``directory``."""
    directory = Path(directory)
    mock = {"model_id": "mock", "kind": "mock"}
    config = {
        "seed": seed,
        "paths": {"raw_dir": str(raw_dir), "store_dir": "store", "index_file": "index/assays.f32",
                  "output_dir": "runs"},
        "hyperparameters": hyper,
        "providers": {"generator": mock, "summarizer": mock, "embedder": mock,
                      "assessors": [dict(mock, model_id="mock-a"), dict(mock, model_id="mock-b")]},
        "query": {"target_id": TARGETS[0][0], "description": TARGETS[0][2],
                  "excluded_uniprot_ids": ["P32298"], "reference_score": TARGETS[0][3]},
        "counter_query": {"target_id": "herg", "mode": "full-description",
                          "description": "hERG (KCNH2) potassium channel; blockade prolongs cardiac repolarization (QT)."},
    }
    path = directory / "config.json"
    path.write_text(json.dumps(config, indent=1) + "\n", encoding="utf-8")
    return path
