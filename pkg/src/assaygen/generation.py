"""Batched generation: marker parsing, validation, dedup, validity, and counter-target optimization."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

from .chem import Molecule, SmilesError, parse_smiles
from .config import Hyperparameters
from .context import AssayContextBlock, GenerationPrompt, build_prompt
from .llm import Gateway, GatewayError

log = logging.getLogger(__name__)

BOS, EOS = "[BOS]", "[EOS]"
MAX_PER_BATCH = 10
_LINE_NUMBER = re.compile(r"^\s*[*#>\-]*\s*\(?(\d{1,2})\s*[.):\]]")


class BatchSizeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ParsedEntry:
    ordinal: int
    smiles: str


@dataclass(frozen=True)
class SpanFailure:
    ordinal: int
    reason: str


def _ordinal_at(raw: str, pos: int) -> int | None:
    line_start = raw.rfind("\n", 0, pos) + 1
    m = _LINE_NUMBER.match(raw[line_start:pos])
    if m and 1 <= int(m.group(1)) <= 10:
        return int(m.group(1))
    return None


def parse_generation(raw: str) -> tuple[list[ParsedEntry], list[SpanFailure]]:
    """Pull ``[BOS] ... [EOS]`` spans out of model text, in order.

    Each span takes the number (1-10) leading its line when there is one,
    else the next sequential ordinal.  A span cut short by another ``[BOS]``
    or by the end of text yields a failure record and no entry.
    """
    entries: list[ParsedEntry] = []
    failures: list[SpanFailure] = []
    seq = 0
    pos = raw.find(BOS)
    while pos != -1:
        seq += 1
        ordinal = _ordinal_at(raw, pos) or seq
        body_start = pos + len(BOS)
        nxt_bos = raw.find(BOS, body_start)
        nxt_eos = raw.find(EOS, body_start)
        if nxt_eos == -1 or (nxt_bos != -1 and nxt_bos < nxt_eos):
            failures.append(SpanFailure(ordinal, "missing [EOS]" if nxt_bos == -1 else "nested [BOS]"))
            pos = nxt_bos
            continue
        smiles = raw[body_start:nxt_eos].strip()
        if smiles:
            entries.append(ParsedEntry(ordinal, smiles))
        else:
            failures.append(SpanFailure(ordinal, "empty span"))
        pos = raw.find(BOS, nxt_eos + len(EOS))
    return entries, failures


@dataclass
class GenerationBatch:
    batch_index: int
    raw_text: str
    parsed: list[ParsedEntry]
    valid_molecules: list[Molecule]
    parse_failures: list[SpanFailure]
    invalid: list[tuple[int, str, str]] = field(default_factory=list)  # ordinal, smiles, reason

    def to_json(self) -> dict[str, Any]:
        return {
            "batch_index": self.batch_index,
            "parsed": [{"ordinal": p.ordinal, "smiles": p.smiles} for p in self.parsed],
            "valid": [m.canonical_smiles for m in self.valid_molecules],
            "parse_failures": [{"ordinal": f.ordinal, "reason": f.reason} for f in self.parse_failures],
            "invalid": [{"ordinal": o, "smiles": s, "reason": r} for o, s, r in self.invalid],
        }


def make_batch(batch_index: int, raw: str) -> GenerationBatch:
    entries, failures = parse_generation(raw)
    if len(entries) > MAX_PER_BATCH:
        failures += [SpanFailure(e.ordinal, "beyond ten per batch") for e in entries[MAX_PER_BATCH:]]
        entries = entries[:MAX_PER_BATCH]
    valid, invalid = [], []
    for e in entries:
        try:
            valid.append(parse_smiles(e.smiles))
        except SmilesError as exc:
            invalid.append((e.ordinal, e.smiles, f"{type(exc).__name__}: {exc}"))
    return GenerationBatch(batch_index, raw, entries, valid, failures, invalid)


def validity(generated: Sequence[str]) -> float | None:
    """Unique parsable strings over unique generated strings; ``None`` for no output."""
    unique = set(generated)
    if not unique:
        return None
    ok = 0
    for s in unique:
        try:
            parse_smiles(s)
            ok += 1
        except SmilesError:
            pass
    return ok / len(unique)


@dataclass
class GenerationRun:
    target_id: str
    seed: int
    batches: list[GenerationBatch] = field(default_factory=list)
    error: str | None = None

    @property
    def generated(self) -> list[str]:
        return [e.smiles for b in self.batches for e in b.parsed]

    @property
    def unique_generated(self) -> set[str]:
        return set(self.generated)

    @property
    def unique_canonical(self) -> list[str]:
        """Canonical SMILES of valid molecules, first-seen order, duplicates removed."""
        seen: dict[str, None] = {}
        for b in self.batches:
            for m in b.valid_molecules:
                seen.setdefault(m.canonical_smiles, None)
        return list(seen)

    @property
    def molecules(self) -> list[Molecule]:
        first: dict[str, Molecule] = {}
        for b in self.batches:
            for m in b.valid_molecules:
                first.setdefault(m.canonical_smiles, m)
        return list(first.values())

    @property
    def validity(self) -> float | None:
        unique = self.unique_generated
        if not unique:
            return None
        valid_raw = {e.smiles for b in self.batches for e in b.parsed} - {s for b in self.batches for _, s, _ in b.invalid}
        return len(valid_raw) / len(unique)

    def to_json(self) -> dict[str, Any]:
        return {
            "target_id": self.target_id, "seed": self.seed, "error": self.error,
            "n_batches": len(self.batches), "validity": self.validity,
            "n_unique_generated": len(self.unique_generated),
            "unique_canonical": self.unique_canonical,
            "batches": [b.to_json() for b in self.batches],
        }

    def digest(self) -> str:
        payload = self.to_json() | {"raw": [b.raw_text for b in self.batches]}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def run_generation(prompt: GenerationPrompt, hp: Hyperparameters, gateway: Gateway, seed: int,
                   target_id: str = "target") -> GenerationRun:
    """Send the same prompt ``ceil(total / batch_size)`` times and collect the batches.

    A provider failure that survives the gateway's retries stops the run; the
    batches gathered so far are kept and ``error`` is set.
    """
    run = GenerationRun(target_id, seed)
    n_calls = math.ceil(hp.total_molecules / hp.batch_size)
    for b in range(n_calls):
        try:
            raw = gateway.chat(gateway.request(prompt.rendered_text, sample_index=seed * 1000 + b))
        except GatewayError as exc:
            run.error = f"batch {b}: {type(exc).__name__}: {exc}"
            log.error("%s: generation aborted at %s", target_id, run.error)
            break
        run.batches.append(make_batch(b, raw))
    return run


# ---------------------------------------------------------------------------
# counter-target optimization


@dataclass(frozen=True)
class OptimizationPair:
    ordinal: int
    original: str
    optimized: str
    fallback: bool = False
    reason: str = ""


def optimize_against_countertarget(molecules: Sequence[Molecule | str], counter_description: str,
                                   counter_blocks: Sequence[AssayContextBlock], gateway: Gateway,
                                   *, char_budget: int = 100_000, template_dir: str | None = None,
                                   sample_index: int = 0) -> list[OptimizationPair]:
    """Ask for optimized versions of exactly ten molecules, pairing replies by ordinal.

    Any optimized entry that is missing or does not parse falls back to its
    original and is flagged.
    """
    if len(molecules) != MAX_PER_BATCH:
        raise BatchSizeMismatch(f"expected {MAX_PER_BATCH} molecules, got {len(molecules)}")
    originals = [m.canonical_smiles if isinstance(m, Molecule) else m for m in molecules]
    prompt = build_prompt(counter_description, counter_blocks, "optimization", input_smiles=originals,
                          char_budget=char_budget, template_dir=template_dir)
    raw = gateway.chat(gateway.request(prompt.rendered_text, sample_index=sample_index))
    entries, _ = parse_generation(raw)
    by_ordinal: dict[int, str] = {}
    for e in entries:
        by_ordinal.setdefault(e.ordinal, e.smiles)
    pairs = []
    for i, orig in enumerate(originals, 1):
        got = by_ordinal.get(i)
        if got is None:
            pairs.append(OptimizationPair(i, orig, orig, True, "no output for this ordinal"))
            continue
        try:
            pairs.append(OptimizationPair(i, orig, parse_smiles(got).canonical_smiles))
        except SmilesError as exc:
            pairs.append(OptimizationPair(i, orig, orig, True, f"unparsable {got!r}: {exc}"))
    return pairs
