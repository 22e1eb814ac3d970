"""Bioassay records: validation, ingestion from JSON/CSV dumps, and a file-backed store.

A persisted store is a directory holding one JSON-lines file per assay
(header line first, then one line per activity row) and a ``manifest.json``
listing the assay identifiers in ingestion order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Any

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
STORE_FORMAT = "assaygen-store/1"


class StoreError(ValueError):
    pass


class MissingAid(StoreError):
    pass


class MissingDescription(StoreError):
    pass


class MalformedRow(StoreError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"row {index}: {reason}")
        self.index = index
        self.reason = reason


class UnknownOutcome(StoreError):
    pass


class NotFound(KeyError):
    pass


class DuplicateAid(StoreError):
    pass


class Outcome(str, Enum):
    ACTIVE = "Active"
    INACTIVE = "Inactive"
    UNSPECIFIED = "Unspecified"


# Source labels outside the three classes are folded in here; anything else is rejected.
OUTCOME_TABLE: dict[str, Outcome] = {
    "active": Outcome.ACTIVE,
    "inactive": Outcome.INACTIVE,
    "unspecified": Outcome.UNSPECIFIED,
    "inconclusive": Outcome.UNSPECIFIED,
    "probe": Outcome.ACTIVE,
}


def map_outcome(label: str) -> Outcome:
    """Case-insensitive mapping of a source activity label onto :class:`Outcome`."""
    if not isinstance(label, str) or not label.strip():
        raise UnknownOutcome("empty outcome label")
    try:
        return OUTCOME_TABLE[label.strip().lower()]
    except KeyError:
        raise UnknownOutcome(label) from None


RELATIONS = ("<", "=", ">")

# canonical spellings of the measure kinds; other labels are kept verbatim
_KINDS = {
    "ic50": "IC50",
    "ki": "Ki",
    "kd": "Kd",
    "percentinhibition": "PercentInhibition",
    "percent inhibition": "PercentInhibition",
    "% inhibition": "PercentInhibition",
    "inhibition": "PercentInhibition",
}
_KIND_LABEL = {"PercentInhibition": "Inhibition"}


def normalize_kind(label: str | None) -> str:
    if label is None or not str(label).strip():
        return "Activity"
    text = str(label).strip()
    return _KINDS.get(text.lower(), text)


@dataclass(frozen=True)
class Measure:
    kind: str
    relation: str
    value: Decimal
    unit: str = ""

    def __post_init__(self) -> None:
        if self.relation not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}, got {self.relation!r}")
        if not self.value.is_finite():
            raise ValueError("measure value must be finite")

    def render(self) -> str:
        parts = [_KIND_LABEL.get(self.kind, self.kind), self.relation, format(self.value, "f")]
        if self.unit:
            parts.append(self.unit)
        return " ".join(parts)


@dataclass(frozen=True)
class ActivityRow:
    smiles: str
    outcome: Outcome
    measure: Measure | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"smiles": self.smiles, "outcome": self.outcome.value}
        if self.measure is not None:
            out.update(
                activity_kind=self.measure.kind,
                relation=self.measure.relation,
                value=format(self.measure.value, "f"),
                unit=self.measure.unit,
            )
        return out


@dataclass(frozen=True)
class TargetRef:
    uniprot_id: str | None = None
    gene_symbol: str | None = None
    organism: str | None = None

    def __post_init__(self) -> None:
        if not (self.uniprot_id or self.gene_symbol or self.organism):
            raise ValueError("target reference needs at least one field")

    def to_json(self) -> dict[str, str]:
        return {k: v for k, v in (("uniprot_id", self.uniprot_id), ("gene_symbol", self.gene_symbol),
                                  ("organism", self.organism)) if v}


@dataclass(frozen=True)
class BioAssayRecord:
    aid: int
    description: str
    title: str = ""
    protocol: str = ""
    comment: str = ""
    targets: tuple[TargetRef, ...] = ()
    rows: tuple[ActivityRow, ...] = field(default=(), repr=False)

    @property
    def uniprot_ids(self) -> frozenset[str]:
        return frozenset(t.uniprot_id for t in self.targets if t.uniprot_id)

    def count(self, outcome: Outcome) -> int:
        return sum(r.outcome is outcome for r in self.rows)

    def header_json(self) -> dict[str, Any]:
        return {
            "aid": self.aid, "title": self.title, "description": self.description,
            "protocol": self.protocol, "comment": self.comment,
            "targets": [t.to_json() for t in self.targets],
        }

    def to_json(self) -> dict[str, Any]:
        return self.header_json() | {"rows": [r.to_json() for r in self.rows]}


# ---------------------------------------------------------------------------
# parsing


def _parse_value(raw: Any) -> Decimal | None:
    if raw is None or isinstance(raw, bool):
        return None
    try:
        value = Decimal(str(raw).strip())
    except InvalidOperation:
        return None
    return value if value.is_finite() else None


def parse_row(raw: Mapping[str, Any], index: int = 0) -> ActivityRow:
    """Validate one activity row given as ``{smiles, outcome, activity_kind, relation, value, unit}``."""
    if not isinstance(raw, Mapping):
        raise MalformedRow(index, "row is not an object")
    smiles = raw.get("smiles")
    if not isinstance(smiles, str) or not smiles.strip():
        raise MalformedRow(index, "missing smiles")
    try:
        outcome = map_outcome(raw.get("outcome", ""))
    except UnknownOutcome as exc:
        raise MalformedRow(index, f"unknown outcome {exc}") from None
    value = _parse_value(raw.get("value"))
    measure = None
    if value is not None:
        relation = str(raw.get("relation") or "=").strip()
        if relation not in RELATIONS:
            raise MalformedRow(index, f"bad relation {relation!r}")
        unit = raw.get("unit")
        measure = Measure(normalize_kind(raw.get("activity_kind")), relation, value,
                          "" if unit is None else str(unit).strip())
    elif raw.get("value") not in (None, ""):
        log.debug("row %d: unparsable value %r kept without measure", index, raw.get("value"))
    return ActivityRow(smiles.strip(), outcome, measure)


def _text(doc: Mapping[str, Any], key: str) -> str:
    value = doc.get(key)
    if value is None:
        return ""
    if isinstance(value, list):  # some dumps split long text into a list of lines
        return "\n".join(str(v) for v in value)
    return str(value)


def ingest_assay(document: Mapping[str, Any]) -> BioAssayRecord:
    """Build a validated record from a JSON assay document; unknown fields are ignored."""
    raw_aid = document.get("aid")
    if raw_aid is None or isinstance(raw_aid, bool):
        raise MissingAid("document has no aid")
    try:
        aid = int(raw_aid)
    except (TypeError, ValueError):
        raise MissingAid(f"aid {raw_aid!r} is not an integer") from None
    if aid <= 0 or str(aid) != str(raw_aid).strip():
        raise MissingAid(f"aid {raw_aid!r} is not a positive integer")
    description = _text(document, "description")
    if not description.strip():
        raise MissingDescription(f"aid {aid} has no description")
    targets = []
    for t in document.get("targets") or ():
        if isinstance(t, Mapping):
            fields = {k: (str(t[k]).strip() or None) if t.get(k) is not None else None
                      for k in ("uniprot_id", "gene_symbol", "organism")}
            if any(fields.values()):
                targets.append(TargetRef(**fields))
    rows = tuple(parse_row(r, i) for i, r in enumerate(document.get("rows") or ()))
    return BioAssayRecord(
        aid=aid, description=description, title=_text(document, "title"),
        protocol=_text(document, "protocol"), comment=_text(document, "comment"),
        targets=tuple(targets), rows=rows,
    )


TABLE_HEADER = ("SMILES", "OUTCOME", "KIND", "RELATION", "VALUE", "UNIT")


def read_activity_table(path: str | Path) -> list[ActivityRow]:
    """Rows from a CSV (or TSV) table with header SMILES,OUTCOME,KIND,RELATION,VALUE,UNIT."""
    text = Path(path).read_text(encoding="utf-8")
    dialect = csv.excel_tab if "\t" in text.splitlines()[0] else csv.excel
    reader = csv.DictReader(text.splitlines(), dialect=dialect)
    header = tuple(h.strip().upper() for h in reader.fieldnames or ())
    if header[:2] != TABLE_HEADER[:2]:
        raise StoreError(f"{path}: expected header {','.join(TABLE_HEADER)}")
    rows = []
    for i, line in enumerate(reader):
        line = {k.strip().upper(): v for k, v in line.items() if k is not None}
        rows.append(parse_row({
            "smiles": line.get("SMILES"), "outcome": line.get("OUTCOME"),
            "activity_kind": line.get("KIND"), "relation": line.get("RELATION"),
            "value": line.get("VALUE") or None, "unit": line.get("UNIT"),
        }, i))
    return rows


def iter_documents(path: str | Path) -> Iterator[dict[str, Any]]:
    """Yield assay documents from a ``.json`` file (object or list) or a ``.jsonl`` file."""
    path = Path(path)
    if path.suffix == ".jsonl":
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield json.loads(line)
        return
    data = json.loads(path.read_text(encoding="utf-8"))
    yield from (data if isinstance(data, list) else [data])


# ---------------------------------------------------------------------------
# store


class AssayStore:
    """In-memory record map; build with :meth:`add`, then :meth:`freeze` before sharing."""

    def __init__(self, records: Iterable[BioAssayRecord] = ()):
        self._records: dict[int, BioAssayRecord] = {}
        self._frozen = False
        for r in records:
            self.add(r)

    def add(self, record: BioAssayRecord) -> None:
        if self._frozen:
            raise StoreError("store is frozen")
        if record.aid in self._records:
            raise DuplicateAid(f"aid {record.aid} already ingested")
        self._records[record.aid] = record

    def freeze(self) -> AssayStore:
        self._frozen = True
        return self

    def lookup(self, aid: int) -> BioAssayRecord:
        try:
            return self._records[aid]
        except KeyError:
            raise NotFound(aid) from None

    def __contains__(self, aid: object) -> bool:
        return aid in self._records

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[BioAssayRecord]:
        return iter(self._records.values())

    @property
    def aids(self) -> list[int]:
        return list(self._records)

    # -- persistence -------------------------------------------------------

    def save(self, directory: str | Path) -> dict[str, Any]:
        directory = Path(directory)
        (directory / "assays").mkdir(parents=True, exist_ok=True)
        digest = hashlib.sha256()
        n_rows = 0
        for rec in self._records.values():
            lines = [json.dumps(rec.header_json(), ensure_ascii=False)]
            lines.extend(json.dumps(r.to_json(), ensure_ascii=False) for r in rec.rows)
            blob = "\n".join(lines) + "\n"
            (directory / "assays" / f"{rec.aid}.jsonl").write_text(blob, encoding="utf-8")
            digest.update(blob.encode("utf-8"))
            n_rows += len(rec.rows)
        manifest = {
            "format": STORE_FORMAT, "count": len(self._records), "rows": n_rows,
            "aids": self.aids, "digest": digest.hexdigest(),
        }
        (directory / MANIFEST).write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
        return manifest

    @classmethod
    def load(cls, directory: str | Path) -> AssayStore:
        directory = Path(directory)
        manifest = json.loads((directory / MANIFEST).read_text(encoding="utf-8"))
        if manifest.get("format") != STORE_FORMAT:
            raise StoreError(f"{directory}: unsupported store format {manifest.get('format')!r}")
        store = cls()
        for aid in manifest["aids"]:
            with (directory / "assays" / f"{aid}.jsonl").open(encoding="utf-8") as fh:
                header = json.loads(fh.readline())
                header["rows"] = [json.loads(line) for line in fh if line.strip()]
            store.add(ingest_assay(header))
        return store.freeze()


def ingest_directory(raw_dir: str | Path) -> tuple[AssayStore, list[str]]:
    """Ingest every ``*.json``/``*.jsonl`` document under ``raw_dir``.

    A document without inline rows picks up a sibling ``<aid>.csv`` activity
    table when present.  Invalid documents are skipped and reported.
    """
    raw_dir = Path(raw_dir)
    store = AssayStore()
    problems: list[str] = []
    for path in sorted(p for p in raw_dir.rglob("*") if p.suffix in (".json", ".jsonl")):
        for n, doc in enumerate(iter_documents(path)):
            try:
                if not doc.get("rows") and isinstance(doc.get("aid"), (int, str)):
                    table = path.parent / f"{doc['aid']}.csv"
                    if table.exists():
                        doc = dict(doc, rows=[r.to_json() for r in read_activity_table(table)])
                store.add(ingest_assay(doc))
            except StoreError as exc:
                problems.append(f"{path.name}#{n}: {exc}")
    return store.freeze(), problems
