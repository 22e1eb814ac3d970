"""Stage functions behind the command line: each reads upstream artifacts and writes its own.

Run layout::

    <output_dir>/<config digest[:16]>/
        run_manifest.json
        calls.jsonl
        aggregate.json, report.csv
        <target_id>/
            keywords.txt, retrieval.json
            summaries.json, prompt.txt, batches/batch_NN.txt,
            generation.json, molecules.smi, manifest.json
            optimization.json
            report.json
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, TypeVar

from .chem import parse_smiles
from .config import ConfigError, QueryConfig, RunConfig
from .context import (
    AssaySummary,
    NoUsableBlocks,
    build_prompt,
    make_block,
    summarize_assay,
)
from .evaluation import (
    EvalReport,
    aggregate_targets,
    baseline_values,
    dock_adapter,
    evaluate_target,
    read_score_file,
    write_report_table,
)
from .generation import MAX_PER_BATCH, optimize_against_countertarget, run_generation
from .index import EmbeddingIndex
from .llm import CallLog, Gateway
from .retrieval import (
    QuerySpec,
    RetrievalResult,
    dump_report,
    extract_keywords,
    retrieve,
)
from .store import MANIFEST, AssayStore, ingest_directory
from .templates import template_digests

log = logging.getLogger(__name__)
T = TypeVar("T")


class MissingArtifact(RuntimeError):
    def __init__(self, command: str, path: Path | str = ""):
        super().__init__(f"missing artifact {path}; run '{command}' first" if path else
                         f"run '{command}' first")
        self.command = command


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _dump(path: Path, data: Any) -> Path:
    return _write(path, json.dumps(data, indent=1, ensure_ascii=False, sort_keys=False) + "\n")


@dataclass
class Context:
    """Resolved configuration plus the shared gateways for one invocation."""

    config: RunConfig
    parallel: int = 1

    def __post_init__(self) -> None:
        self.run_dir = Path(self.config.output_dir) / self.config.digest[:16]
        self.run_dir.mkdir(parents=True, exist_ok=True)
        calls = CallLog(self.run_dir / "calls.jsonl")
        seed = self.config.seed

        def gw(p):
            return Gateway.from_config(p, seed=seed, call_log=calls)
        self.generator = gw(self.config.generator)
        self.summarizer = gw(self.config.summarizer)
        self.assessors = [gw(a) for a in self.config.assessors]
        self.embedder = gw(self.config.embedder)
        self._store: AssayStore | None = None
        self._index: EmbeddingIndex | None = None
        self._counter_blocks: list | None = None
        self.lock = threading.RLock()

    def target_dir(self, target_id: str) -> Path:
        return self.run_dir / target_id

    def store(self) -> AssayStore:
        with self.lock:
            return self._load_store()

    def _load_store(self) -> AssayStore:
        if self._store is None:
            if not (Path(self.config.store_dir) / MANIFEST).exists():
                raise MissingArtifact("ingest", Path(self.config.store_dir) / MANIFEST)
            self._store = AssayStore.load(self.config.store_dir)
        return self._store

    def index(self) -> EmbeddingIndex:
        with self.lock:
            return self._load_index()

    def _load_index(self) -> EmbeddingIndex:
        if self._index is None:
            if not Path(self.config.index_file).exists():
                raise MissingArtifact("index", self.config.index_file)
            self._index = EmbeddingIndex.load(self.config.index_file)
        return self._index

    def map_targets(self, fn: Callable[[QueryConfig], T], targets: Sequence[QueryConfig]) -> list[T]:
        if self.parallel > 1 and len(targets) > 1:
            with ThreadPoolExecutor(self.parallel) as pool:
                return list(pool.map(fn, targets))
        return [fn(t) for t in targets]

    def write_run_manifest(self, command: str) -> None:
        c = self.config
        _dump(self.run_dir / "run_manifest.json", {
            "config_digest": c.digest, "seed": c.seed, "last_command": command,
            "hyperparameters": asdict(c.hyperparameters),
            "providers": {"generator": c.generator.model_id, "summarizer": c.summarizer.model_id,
                          "assessors": [a.model_id for a in c.assessors], "embedder": c.embedder.model_id,
                          "kinds": sorted({p.kind for p in (c.generator, c.summarizer, c.embedder, *c.assessors)})},
            "sampling": {"temperature": c.generator.temperature,
                         "max_output_tokens": c.generator.max_output_tokens},
            "template_digests": template_digests(c.template_dir),
            "policies": {"dedup": "canonical dedup, then metrics", "relevance_ties": "relevant",
                         "improvement": "per molecule, then per-target mean"},
        })


# ---------------------------------------------------------------------------
# stages


def cmd_ingest(ctx: Context) -> dict[str, Any]:
    if not ctx.config.raw_dir:
        raise ConfigError("paths.raw_dir", "required for ingest")
    store, problems = ingest_directory(ctx.config.raw_dir)
    manifest = store.save(ctx.config.store_dir)
    for p in problems:
        log.warning("skipped %s", p)
    manifest["skipped"] = problems
    ctx._store = store
    return manifest


def cmd_index(ctx: Context) -> Path:
    index = EmbeddingIndex.build(ctx.store(), ctx.embedder.embed)
    index.save(ctx.config.index_file)
    ctx._index = index
    return Path(ctx.config.index_file)


def retrieve_target(ctx: Context, q: QueryConfig) -> RetrievalResult:
    tdir = ctx.target_dir(q.target_id)
    keywords = ""
    if q.mode == "keywords":
        keywords = extract_keywords(q.description, ctx.summarizer, ctx.config.template_dir)
        _write(tdir / "keywords.txt", keywords + "\n")
    spec = QuerySpec(q.description, keywords, frozenset(q.excluded_uniprot_ids), q.mode)
    result = retrieve(spec, ctx.store(), ctx.index(), ctx.embedder, ctx.config.hyperparameters,
                      ctx.assessors, ctx.config.template_dir)
    _write(tdir / "retrieval.json", dump_report(result))
    return result


def _load_retrieval(ctx: Context, target_id: str) -> dict[str, Any]:
    path = ctx.target_dir(target_id) / "retrieval.json"
    if not path.exists():
        raise MissingArtifact("retrieve", path)
    return json.loads(path.read_text(encoding="utf-8"))


def _context_blocks(ctx: Context, description: str, report: dict[str, Any]):
    store, hp = ctx.store(), ctx.config.hyperparameters
    sims = {a["aid"]: a["similarity"] for a in report["assays"]}
    summaries: list[AssaySummary] = []
    blocks = []
    for aid in report["selected"]:
        rec = store.lookup(aid)
        s = summarize_assay(rec, description, ctx.summarizer, ctx.config.template_dir)
        summaries.append(s)
        b = make_block(rec, s, hp, ctx.config.seed, sims.get(aid, 0.0))
        if b is not None:
            blocks.append(b)
    return summaries, blocks


def generate_target(ctx: Context, q: QueryConfig) -> dict[str, Any]:
    report = _load_retrieval(ctx, q.target_id)
    tdir = ctx.target_dir(q.target_id)
    hp = ctx.config.hyperparameters
    t0 = time.perf_counter()
    summaries, blocks = _context_blocks(ctx, q.description, report)
    _dump(tdir / "summaries.json", [s.to_json() for s in summaries])
    prompt = build_prompt(q.description, blocks, "generation", char_budget=hp.context_char_budget,
                          template_dir=ctx.config.template_dir)
    _write(tdir / "prompt.txt", prompt.rendered_text)
    run = run_generation(prompt, hp, ctx.generator, ctx.config.seed, q.target_id)
    for b in run.batches:
        _write(tdir / "batches" / f"batch_{b.batch_index:02d}.txt", b.raw_text)
    _dump(tdir / "generation.json", run.to_json())
    _write(tdir / "molecules.smi", "".join(s + "\n" for s in run.unique_canonical))
    manifest = {
        "target_id": q.target_id, "seed": ctx.config.seed, "config_digest": ctx.config.digest,
        "hyperparameters": asdict(hp), "generator_model": ctx.generator.model_id,
        "summarizer_model": ctx.summarizer.model_id, "n_batches": len(run.batches),
        "source_blocks": list(prompt.source_blocks), "dropped_blocks": list(prompt.dropped_blocks),
        "validity": run.validity, "n_unique_valid": len(run.unique_canonical),
        "run_digest": run.digest(), "error": run.error,
        "timings": {"generate_s": round(time.perf_counter() - t0, 3)},
    }
    _dump(tdir / "manifest.json", manifest)
    return manifest


def _load_molecules(ctx: Context, target_id: str) -> list[str]:
    path = ctx.target_dir(target_id) / "molecules.smi"
    if not path.exists():
        raise MissingArtifact("generate", path)
    return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def prepare_counter(ctx: Context):
    """Retrieve and summarize the counter-target assays once per run (cached on the context)."""
    counter = ctx.config.counter_query
    if counter is None:
        raise ConfigError("counter_query", "required for optimize")
    with ctx.lock:
        if ctx._counter_blocks is None:
            cq = replace(counter, target_id=f"_counter_{counter.target_id}")
            if not (ctx.target_dir(cq.target_id) / "retrieval.json").exists():
                retrieve_target(ctx, cq)
            _, ctx._counter_blocks = _context_blocks(ctx, cq.description, _load_retrieval(ctx, cq.target_id))
        return ctx._counter_blocks


def optimize_target(ctx: Context, q: QueryConfig) -> dict[str, Any]:
    counter = ctx.config.counter_query
    if counter is None:
        raise ConfigError("counter_query", "required for optimize")
    smiles = _load_molecules(ctx, q.target_id)
    tdir = ctx.target_dir(q.target_id)
    blocks = prepare_counter(ctx)
    groups = [smiles[i:i + MAX_PER_BATCH] for i in range(0, len(smiles) - MAX_PER_BATCH + 1, MAX_PER_BATCH)]
    out: dict[str, Any] = {"target_id": q.target_id, "counter_target": counter.target_id,
                           "skipped_tail": len(smiles) - MAX_PER_BATCH * len(groups), "pairs": []}
    for gi, group in enumerate(groups):
        pairs = optimize_against_countertarget(
            [parse_smiles(s) for s in group], counter.description, blocks, ctx.generator,
            char_budget=ctx.config.hyperparameters.context_char_budget,
            template_dir=ctx.config.template_dir, sample_index=gi)
        out["pairs"] += [asdict(p) | {"group": gi} for p in pairs]
    out["n_fallback"] = sum(p["fallback"] for p in out["pairs"])
    _dump(tdir / "optimization.json", out)
    return out


def evaluate_one(ctx: Context, q: QueryConfig) -> EvalReport:
    smiles = _load_molecules(ctx, q.target_id)
    tdir = ctx.target_dir(q.target_id)
    mols = [parse_smiles(s) for s in smiles]
    if q.score_file:
        scores = dock_adapter(mols, score_file=q.score_file)
    elif ctx.config.dock_tool:
        scores = dock_adapter(mols, ctx.config.receptor, ctx.config.dock_tool)
    else:
        scores = []
    baseline = baseline_values(read_score_file(q.baseline_file)) if q.baseline_file else []
    gen_manifest = tdir / "manifest.json"
    validity = json.loads(gen_manifest.read_text())["validity"] if gen_manifest.exists() else None
    retrieval = tdir / "retrieval.json"
    group = None
    if retrieval.exists():
        rel = json.loads(retrieval.read_text()).get("relevance")
        group = rel["group"] if rel else None
    report = evaluate_target(q.target_id, mols, scores, reference_score=q.reference_score,
                             baseline_scores=baseline, validity=validity, relevance_group=group)
    _dump(tdir / "report.json", report.to_json())
    return report


def cmd_evaluate(ctx: Context, targets: Sequence[QueryConfig]) -> dict[str, Any]:
    reports = ctx.map_targets(lambda q: evaluate_one(ctx, q), targets)
    write_report_table(ctx.run_dir / "report.csv", reports)
    agg = aggregate_targets(reports)
    _dump(ctx.run_dir / "aggregate.json", {"n_targets": len(reports), "metrics": agg})
    return agg


__all__ = [
    "Context", "MissingArtifact", "NoUsableBlocks", "cmd_evaluate", "cmd_index", "cmd_ingest",
    "evaluate_one", "generate_target", "optimize_target", "retrieve_target",
]
