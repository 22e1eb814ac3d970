"""Hyperparameters and the JSON run configuration consumed by the command line."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .llm import ProviderConfig


class ConfigError(ValueError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


@dataclass(frozen=True)
class Hyperparameters:
    max_assay_num: int = 10
    n_mol: int = 8
    max_mol_size: int = 45
    min_mol_num: int = 8
    retrieval_k: int = 300
    batch_size: int = 10
    total_molecules: int = 100
    context_char_budget: int = 100_000

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"hyperparameters.{f.name}", "must be a positive integer")
        if self.batch_size > self.total_molecules:
            raise ConfigError("hyperparameters.batch_size", "must not exceed total_molecules")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> Hyperparameters:
        data = dict(data or {})
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError("hyperparameters", f"unknown keys {sorted(unknown)}")
        return cls(**data)


def _provider(data: Any, name: str) -> ProviderConfig:
    if not isinstance(data, Mapping):
        raise ConfigError(f"providers.{name}", "must be an object")
    try:
        return ProviderConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"providers.{name}", str(exc)) from None


@dataclass(frozen=True)
class QueryConfig:
    target_id: str
    description: str
    excluded_uniprot_ids: tuple[str, ...] = ()
    mode: str = "keywords"
    reference_score: float | None = None
    score_file: str | None = None
    baseline_file: str | None = None


@dataclass(frozen=True)
class RunConfig:
    raw_dir: str | None
    store_dir: str
    index_file: str
    output_dir: str
    template_dir: str | None
    hyperparameters: Hyperparameters
    generator: ProviderConfig
    summarizer: ProviderConfig
    assessors: tuple[ProviderConfig, ...]
    embedder: ProviderConfig
    seed: int
    query: QueryConfig | None
    counter_query: QueryConfig | None = None
    dock_tool: str | None = None
    receptor: str | None = None
    raw: Mapping[str, Any] = field(default_factory=dict, repr=False, compare=False)

    @property
    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_mock_providers(self) -> RunConfig:
        def mock(p: ProviderConfig) -> ProviderConfig:
            return replace(p, kind="mock")
        raw = dict(self.raw, mock_llm=True)
        return replace(self, generator=mock(self.generator), summarizer=mock(self.summarizer),
                       assessors=tuple(mock(a) for a in self.assessors),
                       embedder=mock(self.embedder), raw=raw)

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, seed=seed, raw=dict(self.raw, seed=seed))


def _query(data: Any, base: Path, name: str) -> QueryConfig:
    if not isinstance(data, Mapping):
        raise ConfigError(name, "must be an object")
    description = data.get("description")
    if not description and data.get("description_file"):
        path = _resolve(base, data["description_file"])
        if not path.exists():
            raise ConfigError(f"{name}.description_file", f"{path} does not exist")
        description = path.read_text(encoding="utf-8").strip()
    if not isinstance(description, str) or not description.strip():
        raise ConfigError(f"{name}.description", "required and non-empty")
    mode = data.get("mode", "keywords")
    if mode not in ("keywords", "full-description"):
        raise ConfigError(f"{name}.mode", "must be 'keywords' or 'full-description'")
    ref = data.get("reference_score")
    return QueryConfig(
        target_id=str(data.get("target_id") or "target"),
        description=description.strip(),
        excluded_uniprot_ids=tuple(data.get("excluded_uniprot_ids") or ()),
        mode=mode,
        reference_score=None if ref is None else float(ref),
        score_file=str(_resolve(base, data["score_file"])) if data.get("score_file") else None,
        baseline_file=str(_resolve(base, data["baseline_file"])) if data.get("baseline_file") else None,
    )


def _resolve(base: Path, p: str | None) -> Path:
    path = Path(p) if p is not None else base
    return path if path.is_absolute() else (base / path)


def parse_config(data: Mapping[str, Any], base: str | Path = ".") -> RunConfig:
    """Validate a config mapping; relative paths resolve against ``base``."""
    base = Path(base)
    if "seed" not in data or not isinstance(data["seed"], int) or isinstance(data["seed"], bool):
        raise ConfigError("seed", "an integer seed is required")
    paths = data.get("paths")
    if not isinstance(paths, Mapping):
        raise ConfigError("paths", "must be an object")
    for key in ("store_dir", "index_file", "output_dir"):
        if not paths.get(key):
            raise ConfigError(f"paths.{key}", "required")
    template_dir = paths.get("template_dir")
    if template_dir and not _resolve(base, template_dir).is_dir():
        raise ConfigError("paths.template_dir", "does not exist")
    raw_dir = paths.get("raw_dir")
    if raw_dir and not _resolve(base, raw_dir).is_dir():
        raise ConfigError("paths.raw_dir", "does not exist")
    providers = data.get("providers") or {}
    if not isinstance(providers, Mapping):
        raise ConfigError("providers", "must be an object")
    default = {"model_id": "mock", "kind": "mock"}
    generator = _provider(providers.get("generator", default), "generator")
    assessors_raw = providers.get("assessors", [default])
    if not isinstance(assessors_raw, list) or not assessors_raw:
        raise ConfigError("providers.assessors", "must be a non-empty list")
    tools = data.get("tools") or {}
    return RunConfig(
        raw_dir=str(_resolve(base, raw_dir)) if raw_dir else None,
        store_dir=str(_resolve(base, paths["store_dir"])),
        index_file=str(_resolve(base, paths["index_file"])),
        output_dir=str(_resolve(base, paths["output_dir"])),
        template_dir=str(_resolve(base, template_dir)) if template_dir else None,
        hyperparameters=Hyperparameters.from_dict(data.get("hyperparameters")),
        generator=generator,
        summarizer=_provider(providers.get("summarizer", asdict(generator)), "summarizer"),
        assessors=tuple(_provider(a, f"assessors[{i}]") for i, a in enumerate(assessors_raw)),
        embedder=_provider(providers.get("embedder", default), "embedder"),
        seed=data["seed"],
        query=_query(data["query"], base, "query") if data.get("query") else None,
        counter_query=_query(data["counter_query"], base, "counter_query") if data.get("counter_query") else None,
        dock_tool=tools.get("dock"),
        receptor=tools.get("receptor"),
        raw=json.loads(json.dumps(data)),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("--config", f"{path} not found") from None
    except ValueError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    if not isinstance(data, Mapping):
        raise ConfigError("--config", "top level must be an object")
    return parse_config(data, path.parent)


def load_targets(path: str | Path) -> list[QueryConfig]:
    """One query per JSON-lines record (batch mode)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("--targets", f"{path} not found")
    out = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if line.strip():
            try:
                rec = json.loads(line)
            except ValueError as exc:
                raise ConfigError(f"--targets line {n}", str(exc)) from None
            out.append(_query(rec, path.parent, f"targets[{n}]"))
    ids = [q.target_id for q in out]
    if len(set(ids)) != len(ids):
        raise ConfigError("--targets", "target_id values must be unique")
    return out
