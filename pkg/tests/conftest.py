from __future__ import annotations

import csv
from pathlib import Path

import pytest
from hypothesis import settings

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

settings.register_profile("default", max_examples=150, deadline=None)
settings.load_profile("default")


def read_tsv(name: str) -> list[dict[str, str]]:
    with open(FIXTURES / name, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


@pytest.fixture(scope="session")
def validity_corpus() -> list[dict[str, str]]:
    return read_tsv("smiles_validity.tsv")


@pytest.fixture(scope="session")
def valid_smiles(validity_corpus) -> list[str]:
    return [r["smiles"] for r in validity_corpus if r["rdkit_valid"] == "1"]


def make_workspace(root: Path, n_assays: int = 48, seed: int = 0, **hyper: int) -> dict[str, Path]:
    """Synthetic raw assays, three targets with score files, and a mock-provider config."""
    from assaygen.synthetic import make_corpus, write_config, write_raw, write_targets

    root.mkdir(parents=True, exist_ok=True)
    docs = make_corpus(n_assays, seed=seed)
    raw = write_raw(root / "raw", docs)
    targets = write_targets(root, docs, seed=seed)
    config = write_config(root, raw, seed=seed, **hyper)
    return {"root": root, "config": config, "targets": targets}


@pytest.fixture
def workspace(tmp_path) -> dict[str, Path]:
    return make_workspace(tmp_path / "ws")
