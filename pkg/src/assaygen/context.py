"""Assay summaries, class-balanced exemplar sampling, and prompt assembly."""

from __future__ import annotations

import logging
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .chem import SmilesError, parse_smiles
from .config import Hyperparameters
from .index import embedding_payload
from .llm import (
    Gateway,
    GatewayError,
    MissingKey,
    NoObjectFound,
    as_bool,
    extract_structured,
)
from .store import ActivityRow, BioAssayRecord, Outcome
from .templates import load_template

log = logging.getLogger(__name__)

SUMMARY_KEYS = ("BioAssay_Summary", "Assay_Type", "Summary_of_Observations", "CounterScreen")
CHARS_PER_TOKEN = 4


class EmptyRows(ValueError):
    pass


class NoUsableBlocks(ValueError):
    pass


@dataclass(frozen=True)
class AssaySummary:
    aid: int
    summary: str = ""
    assay_type: str = ""
    observations: str = ""
    counterscreen: bool = False
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_json(self) -> dict:
        return {"aid": self.aid, "summary": self.summary, "assay_type": self.assay_type,
                "observations": self.observations, "counterscreen": self.counterscreen,
                "error": self.error}


def summarize_assay(record: BioAssayRecord, description: str, gateway: Gateway,
                    template_dir: str | None = None) -> AssaySummary:
    """Ask the model for the four summary fields; failures come back as a marked summary."""
    prompt = load_template("summarize", template_dir).render({
        "Protein Description": description, "BioAssay JSON": embedding_payload(record)})
    try:
        data = extract_structured(gateway.chat(gateway.request(prompt)), SUMMARY_KEYS)
        counter = as_bool(data["CounterScreen"])
    except (GatewayError, NoObjectFound, MissingKey, ValueError) as exc:
        log.warning("aid %d: summary failed: %s", record.aid, exc)
        return AssaySummary(record.aid, error=f"{type(exc).__name__}: {exc}")
    if not data["BioAssay_Summary"].strip():
        return AssaySummary(record.aid, error="empty BioAssay_Summary")
    return AssaySummary(record.aid, data["BioAssay_Summary"].strip(), data["Assay_Type"].strip(),
                        data["Summary_of_Observations"].strip(), counter)


# ---------------------------------------------------------------------------
# sampling


def usable_rows(rows: Sequence[ActivityRow], max_mol_size: int) -> list[ActivityRow]:
    """Rows whose SMILES parse and whose heavy-atom count is at most ``max_mol_size``."""
    out = []
    for r in rows:
        try:
            mol = parse_smiles(r.smiles)
        except SmilesError:
            continue
        if mol.heavy_atom_count <= max_mol_size:
            out.append(r)
    return out


def sample_molecules(rows: Sequence[ActivityRow], hp: Hyperparameters,
                     rng: random.Random) -> list[ActivityRow]:
    """Class-balanced exemplar sample, actives first.

    Up to ``n_mol`` actives plus up to ``n_mol`` from inactive/unspecified; with
    no actives at all, every row, or ``2 * n_mol`` of them if there are more.
    """
    if not rows:
        raise EmptyRows("no rows to sample")
    n = hp.n_mol
    actives = [r for r in rows if r.outcome is Outcome.ACTIVE]
    others = [r for r in rows if r.outcome is not Outcome.ACTIVE]
    if not actives:
        return list(rows) if len(rows) <= 2 * n else rng.sample(list(rows), 2 * n)
    picked = actives if len(actives) <= n else rng.sample(actives, n)
    return list(picked) + (others if len(others) <= n else rng.sample(others, n))


def render_table(sampled: Sequence[ActivityRow]) -> list[str]:
    lines = []
    for r in sampled:
        parts = [r.smiles, r.outcome.value]
        if r.measure is not None:
            parts.append(r.measure.render())
        lines.append(" ".join(parts))
    return lines


@dataclass(frozen=True)
class AssayContextBlock:
    summary: AssaySummary
    table_lines: tuple[str, ...]
    sampled: tuple[ActivityRow, ...]
    similarity: float = 0.0

    @property
    def aid(self) -> int:
        return self.summary.aid


def exclusion_reason(record: BioAssayRecord, rows: Sequence[ActivityRow], hp: Hyperparameters) -> str | None:
    if not rows:
        return "no usable rows"
    if not any(r.outcome is Outcome.ACTIVE for r in rows) and len(rows) < 2 * hp.n_mol:
        return f"no actives and fewer than {2 * hp.n_mol} rows"
    return None


def make_block(record: BioAssayRecord, summary: AssaySummary, hp: Hyperparameters, seed: int,
               similarity: float = 0.0) -> AssayContextBlock | None:
    """Pre-filter rows, apply the no-actives gate, sample and render; ``None`` if excluded."""
    if summary.failed:
        return None
    rows = usable_rows(record.rows, hp.max_mol_size)
    reason = exclusion_reason(record, rows, hp)
    if reason is not None:
        log.info("aid %d excluded from context: %s", record.aid, reason)
        return None
    sampled = sample_molecules(rows, hp, random.Random(f"{seed}:{record.aid}"))
    return AssayContextBlock(summary, tuple(render_table(sampled)), tuple(sampled), similarity)


# ---------------------------------------------------------------------------
# prompts


AVOID_NOTE = ("CounterScreen: True. This assay flags off-target or interfering compounds; "
              "its Active molecules are examples to avoid.")


def render_block(block: AssayContextBlock, template_dir: str | None = None) -> str:
    s = block.summary
    head = [f"BioAssay AID {s.aid} (Assay type: {s.assay_type or 'unknown'})"]
    if s.counterscreen:
        head.append(AVOID_NOTE)
    head.append(s.summary)
    if s.observations:
        head.append(s.observations)
    table = load_template("table_header", template_dir).text.rstrip("\n")
    return "\n".join(head) + "\n\n" + table + "\n" + "\n".join(block.table_lines)


@dataclass(frozen=True)
class GenerationPrompt:
    template_id: str
    rendered_text: str
    source_blocks: tuple[int, ...] = ()
    dropped_blocks: tuple[int, ...] = ()
    sampled_smiles: tuple[str, ...] = field(default=(), repr=False)


def _fill(template_id: str, description: str, content: str, input_smiles: Sequence[str],
          template_dir: str | None) -> str:
    if template_id == "generation":
        return load_template("generate", template_dir).render(
            {"Protein Description": description, "Assay Content": content})
    if template_id == "optimization":
        listed = "\n".join(f"{i}. {s}" for i, s in enumerate(input_smiles, 1))
        return load_template("optimize", template_dir).render(
            {"hERG description": description, "hERG BioAssays": content, "Input SMILES": listed})
    if template_id == "ablation":
        return load_template("ablation", template_dir).render({"protein_description": description})
    raise ValueError(f"unknown template id {template_id!r}")


def build_prompt(description: str, blocks: Sequence[AssayContextBlock], template_id: str = "generation",
                 *, input_smiles: Sequence[str] = (), char_budget: int = 100_000,
                 template_dir: str | None = None) -> GenerationPrompt:
    """Fill the chosen template with the assay blocks.

    If the prompt exceeds ``char_budget`` characters (about ``char_budget / 4``
    tokens), blocks are dropped least-similar first until it fits.
    """
    if template_id == "ablation":
        return GenerationPrompt(template_id, _fill(template_id, description, "", (), template_dir))
    usable = [b for b in blocks if not b.summary.failed]
    if not usable:
        raise NoUsableBlocks("no usable assay blocks")
    keep = list(usable)
    dropped: list[int] = []
    rendered = {b.aid: render_block(b, template_dir) for b in usable}
    while True:
        text = _fill(template_id, description, "\n\n".join(rendered[b.aid] for b in keep),
                     input_smiles, template_dir)
        if len(text) <= char_budget:
            break
        worst = min(keep, key=lambda b: (b.similarity, -b.aid))
        keep.remove(worst)
        dropped.append(worst.aid)
        if not keep:
            raise NoUsableBlocks(f"no block fits the {char_budget}-character budget")
    smiles = tuple(r.smiles for b in keep for r in b.sampled)
    return GenerationPrompt(template_id, text, tuple(b.aid for b in keep), tuple(dropped), smiles)


def estimate_tokens(text: str) -> int:
    return -(-len(text) // CHARS_PER_TOKEN)


def summaries_by_aid(summaries: Sequence[AssaySummary]) -> Mapping[int, AssaySummary]:
    return {s.aid: s for s in summaries}
