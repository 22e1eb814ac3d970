"""From a target description to a filtered, relevance-checked list of assays."""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .config import Hyperparameters
from .index import EmbeddingIndex, RetrievalHit, embedding_payload
from .llm import (
    Gateway,
    GatewayError,
    MissingKey,
    NoObjectFound,
    as_bool,
    extract_structured,
)
from .store import AssayStore, BioAssayRecord, NotFound
from .templates import load_template

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuerySpec:
    description: str
    keywords: str = ""
    excluded_uniprot_ids: frozenset[str] = frozenset()
    mode: str = "keywords"

    def __post_init__(self) -> None:
        if not self.description.strip():
            raise ValueError("description must be non-empty")
        if self.mode not in ("keywords", "full-description"):
            raise ValueError(f"unknown query mode {self.mode!r}")
        if self.mode == "keywords" and not self.keywords.strip():
            raise ValueError("keywords required in keywords mode")

    @property
    def embedding_text(self) -> str:
        return self.keywords if self.mode == "keywords" else self.description


def extract_keywords(description: str, gateway: Gateway, template_dir: str | None = None) -> str:
    """Comma-separated keywords from the model; an empty reply falls back to ``description``."""
    if not description.strip():
        raise ValueError("description must be non-empty")
    prompt = load_template("keywords", template_dir).render({"Protein Description": description})
    reply = gateway.chat(gateway.request(prompt)).strip()
    return reply or description


# ---------------------------------------------------------------------------
# filtering


@dataclass(frozen=True)
class FilterOutcome:
    aid: int
    similarity: float
    kept: bool
    reason: str  # "kept", "excluded-target", "too-few-molecules", "over-limit", "missing"


def filter_assays_detailed(hits: Sequence[RetrievalHit], store: AssayStore, query: QuerySpec,
                           hp: Hyperparameters) -> tuple[list[BioAssayRecord], list[FilterOutcome]]:
    kept: list[BioAssayRecord] = []
    outcomes: list[FilterOutcome] = []
    for hit in hits:
        try:
            rec = store.lookup(hit.aid)
        except NotFound:
            outcomes.append(FilterOutcome(hit.aid, hit.similarity, False, "missing"))
            continue
        if rec.uniprot_ids & query.excluded_uniprot_ids:
            reason = "excluded-target"
        elif len(rec.rows) < hp.min_mol_num:
            reason = "too-few-molecules"
        elif len(kept) >= hp.max_assay_num:
            reason = "over-limit"
        else:
            reason = "kept"
            kept.append(rec)
        outcomes.append(FilterOutcome(hit.aid, hit.similarity, reason == "kept", reason))
    return kept, outcomes


def filter_assays(hits: Sequence[RetrievalHit], store: AssayStore, query: QuerySpec,
                  hp: Hyperparameters) -> list[BioAssayRecord]:
    """Drop excluded targets, then small assays, then cap at ``max_assay_num``; order kept."""
    return filter_assays_detailed(hits, store, query, hp)[0]


# ---------------------------------------------------------------------------
# relevance


@dataclass(frozen=True)
class Vote:
    assessor_model: str
    relevant: bool


@dataclass(frozen=True)
class Abstention:
    assessor_model: str
    reason: str


@dataclass(frozen=True)
class RelevanceAssessment:
    aid: int
    votes: tuple[Vote, ...]
    abstentions: tuple[Abstention, ...] = ()

    def verdict(self, ties_relevant: bool = True) -> bool | None:
        """Majority of votes; ``None`` when every assessor abstained."""
        if not self.votes:
            return None
        yes = sum(v.relevant for v in self.votes)
        no = len(self.votes) - yes
        return yes > no or (yes == no and ties_relevant)


def assess_relevance(record: BioAssayRecord, description: str, assessors: Sequence[Gateway],
                     template_dir: str | None = None) -> RelevanceAssessment:
    """One vote per assessor; a failing assessor is recorded as an abstention."""
    prompt = load_template("relevance", template_dir).render({
        "protein description": description, "BioAssay content": embedding_payload(record)})
    votes: list[Vote] = []
    abstain: list[Abstention] = []
    for gw in assessors:
        try:
            reply = gw.chat(gw.request(prompt))
            votes.append(Vote(gw.model_id, as_bool(extract_structured(reply, ["Relevant"])["Relevant"])))
        except (GatewayError, NoObjectFound, MissingKey, ValueError) as exc:
            log.warning("aid %d: assessor %s abstained: %s", record.aid, gw.model_id, exc)
            abstain.append(Abstention(gw.model_id, f"{type(exc).__name__}: {exc}"))
    return RelevanceAssessment(record.aid, tuple(votes), tuple(abstain))


class RelevanceGroup(str, Enum):
    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"
    NO = "No"


def group_for(x: float) -> RelevanceGroup:
    if x >= 0.7:
        return RelevanceGroup.HIGH
    if x > 0.4:
        return RelevanceGroup.MEDIUM
    if x > 0.1:
        return RelevanceGroup.LOW
    return RelevanceGroup.NO


def relevance_group(assessments: Sequence[RelevanceAssessment],
                    ties_relevant: bool = True) -> tuple[RelevanceGroup, float]:
    """Fraction ``x`` of assays judged relevant and its group.

    Assays on which every assessor abstained are left out of the denominator;
    if that leaves nothing, ``x`` is 0.
    """
    if not assessments:
        raise ValueError("need at least one assessment")
    verdicts = [v for v in (a.verdict(ties_relevant) for a in assessments) if v is not None]
    x = sum(verdicts) / len(verdicts) if verdicts else 0.0
    return group_for(x), x


# ---------------------------------------------------------------------------
# orchestration


@dataclass
class RetrievalResult:
    query: QuerySpec
    k: int
    hits: list[RetrievalHit]
    outcomes: list[FilterOutcome]
    records: list[BioAssayRecord]
    assessments: list[RelevanceAssessment] = field(default_factory=list)
    group: RelevanceGroup | None = None
    x: float | None = None

    @property
    def similarity(self) -> dict[int, float]:
        return {h.aid: h.similarity for h in self.hits}

    def report(self) -> dict[str, Any]:
        votes = {a.aid: a for a in self.assessments}
        per_assay = []
        for o in self.outcomes:
            entry: dict[str, Any] = {"aid": o.aid, "similarity": o.similarity, "filter": o.reason}
            if o.aid in votes:
                a = votes[o.aid]
                entry["votes"] = [{"assessor_model": v.assessor_model, "relevant": v.relevant} for v in a.votes]
                entry["abstentions"] = [{"assessor_model": v.assessor_model, "reason": v.reason}
                                        for v in a.abstentions]
            per_assay.append(entry)
        return {
            "query": {"description": self.query.description, "keywords": self.query.keywords,
                      "mode": self.query.mode, "excluded_uniprot_ids": sorted(self.query.excluded_uniprot_ids)},
            "k": self.k,
            "selected": [r.aid for r in self.records],
            "assays": per_assay,
            "relevance": None if self.group is None else {"group": self.group.value, "x": self.x},
        }


def retrieve(query: QuerySpec, store: AssayStore, index: EmbeddingIndex, embedder: Gateway,
             hp: Hyperparameters, assessors: Sequence[Gateway] = (), template_dir: str | None = None,
             parallel: int = 1) -> RetrievalResult:
    """Embed the query, take the top ``retrieval_k`` hits, filter, then optionally vote on relevance."""
    hits = index.top_k(embedder.embed(query.embedding_text), hp.retrieval_k)
    records, outcomes = filter_assays_detailed(hits, store, query, hp)
    result = RetrievalResult(query, hp.retrieval_k, hits, outcomes, records)
    if assessors and records:
        def one(rec: BioAssayRecord) -> RelevanceAssessment:
            return assess_relevance(rec, query.description, assessors, template_dir)
        if parallel > 1:
            with ThreadPoolExecutor(parallel) as pool:
                result.assessments = list(pool.map(one, records))
        else:
            result.assessments = [one(r) for r in records]
        result.group, result.x = relevance_group(result.assessments)
    return result


def dump_report(result: RetrievalResult) -> str:
    return json.dumps(result.report(), indent=1, ensure_ascii=False) + "\n"
