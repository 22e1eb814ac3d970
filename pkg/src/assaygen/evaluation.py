"""Per-target metrics, cross-target aggregation, score-file import and the docking adapter.

Docking scores (kcal/mol, lower is better) and other descriptors come from
outside: either CSV score files with header ``SMILES,KIND,VALUE`` or an
external executable.  The executable contract is::

    <tool> <receptor-path> <ligands.smi>

where ``ligands.smi`` holds one SMILES per line.  The tool prints one line
per scored ligand matching ``^(\\S+)\\s+(-?\\d+(\\.\\d+)?([eE][-+]?\\d+)?)$``
(SMILES, score).  Ligands it skips count as missing scores.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import re
import shutil
import statistics
import subprocess
import tempfile
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any

from .chem import (
    Molecule,
    SmilesError,
    diversity,
    morgan_fingerprint,
    parse_smiles,
    tanimoto,
)
from .store import ActivityRow

log = logging.getLogger(__name__)

SCORE_HEADER = ("SMILES", "KIND", "VALUE")
TOOL_LINE = re.compile(r"^(\S+)\s+(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)$")
HIST_BIN = 0.05


class EvalError(ValueError):
    pass


class Empty(EvalError):
    pass


class EmptyBaseline(EvalError):
    pass


class NoHighScoringContext(EvalError):
    pass


class ToolNotFound(EvalError):
    pass


class ToolCrash(EvalError):
    def __init__(self, returncode: int, stderr: str):
        super().__init__(f"tool exited with {returncode}: {stderr[-500:]}")
        self.returncode = returncode
        self.stderr = stderr


class UnparseableOutput(EvalError):
    def __init__(self, line_number: int, line: str):
        super().__init__(f"line {line_number}: cannot parse {line[:120]!r}")
        self.line_number = line_number


class ScoreKind(str, Enum):
    VINA_DOCK = "vina_dock"
    QED = "qed"
    SA = "sa"
    HERG = "herg"


class ScoreSource(str, Enum):
    EXTERNAL_TOOL = "external_tool"
    IMPORTED_FILE = "imported_file"


@dataclass(frozen=True)
class ScoreRecord:
    canonical_smiles: str
    score_kind: ScoreKind
    value: float
    source: ScoreSource

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError("score must be finite")
        if self.score_kind is not ScoreKind.VINA_DOCK and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"{self.score_kind.value} score {self.value} outside [0, 1]")


def _canon(smiles: str) -> str:
    try:
        return parse_smiles(smiles).canonical_smiles
    except SmilesError:
        return smiles


def read_score_file(path: str | Path, kind: ScoreKind | None = None) -> list[ScoreRecord]:
    """Parse a ``SMILES,KIND,VALUE`` file; blank values are treated as missing."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(c.strip().upper() for c in next(csv.reader([lines[0]]))) != SCORE_HEADER:
        raise UnparseableOutput(1, lines[0] if lines else "")
    out: list[ScoreRecord] = []
    for n, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 3:
            raise UnparseableOutput(n, ",".join(row))
        smiles, k, value = (c.strip() for c in row)
        try:
            skind = ScoreKind(k.lower())
        except ValueError:
            raise UnparseableOutput(n, ",".join(row)) from None
        if kind is not None and skind is not kind:
            continue
        if not value:
            log.info("%s:%d: no %s score for %s", path, n, skind.value, smiles)
            continue
        try:
            out.append(ScoreRecord(_canon(smiles), skind, float(value), ScoreSource.IMPORTED_FILE))
        except ValueError:
            raise UnparseableOutput(n, ",".join(row)) from None
    return out


def write_score_file(path: str | Path, records: Iterable[ScoreRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_HEADER)
        for r in records:
            w.writerow([r.canonical_smiles, r.score_kind.value, repr(r.value)])


def _run_tool(tool: str, receptor: str, smiles: Sequence[str], timeout: float | None) -> dict[str, float]:
    with tempfile.TemporaryDirectory() as tmp:
        lig = Path(tmp) / "ligands.smi"
        lig.write_text("".join(s + "\n" for s in smiles), encoding="utf-8")
        proc = subprocess.run([tool, str(receptor), str(lig)], capture_output=True, text=True,
                              timeout=timeout, check=False)
    if proc.returncode != 0:
        raise ToolCrash(proc.returncode, proc.stderr)
    scores: dict[str, float] = {}
    for n, line in enumerate(proc.stdout.splitlines(), 1):
        if not line.strip():
            continue
        m = TOOL_LINE.match(line.strip())
        if not m:
            raise UnparseableOutput(n, line)
        scores[m.group(1)] = float(m.group(2))
    return scores


def dock_adapter(molecules: Sequence[Molecule | str], receptor: str | Path | None = None,
                 tool: str | None = None, *, score_file: str | Path | None = None,
                 workers: int | None = None, timeout: float | None = None) -> list[ScoreRecord]:
    """Docking scores for ``molecules`` from an imported file or the external tool.

    Molecules without a score are logged and left out; they are never scored as zero.
    """
    smiles = [m.canonical_smiles if isinstance(m, Molecule) else _canon(m) for m in molecules]
    if score_file is not None:
        table = {r.canonical_smiles: r for r in read_score_file(score_file, ScoreKind.VINA_DOCK)}
        found = [table[s] for s in smiles if s in table]
        for s in smiles:
            if s not in table:
                log.info("no imported docking score for %s", s)
        return found
    if tool is None or receptor is None:
        raise ToolNotFound("need either a score file or a docking tool plus receptor")
    exe = shutil.which(tool)
    if exe is None:
        raise ToolNotFound(tool)
    workers = workers or os.cpu_count() or 1
    chunks = [smiles[i::workers] for i in range(workers) if smiles[i::workers]]
    with ThreadPoolExecutor(len(chunks) or 1) as pool:
        results = list(pool.map(lambda c: _run_tool(exe, str(receptor), c, timeout), chunks))
    merged: dict[str, float] = {}
    for r in results:
        merged.update(r)
    out = []
    for s in smiles:
        if s in merged:
            out.append(ScoreRecord(s, ScoreKind.VINA_DOCK, merged[s], ScoreSource.EXTERNAL_TOOL))
        else:
            log.info("docking tool returned no score for %s", s)
    return out


# ---------------------------------------------------------------------------
# metrics


def high_affinity_fraction(scores: Sequence[float], reference_score: float) -> float:
    """Share of scores strictly better (lower) than the reference ligand's."""
    if not scores:
        raise Empty("no scores")
    return sum(s < reference_score for s in scores) / len(scores)


def improvement_over_baseline(score: float, baseline_scores: Sequence[float]) -> float:
    """``mean(baseline) - score``: positive when the molecule docks better than the baseline mean."""
    if not baseline_scores:
        raise EmptyBaseline("baseline is empty")
    return statistics.fmean(baseline_scores) - score


def _mean(xs: Sequence[float]) -> float | None:
    return statistics.fmean(xs) if xs else None


def _median(xs: Sequence[float]) -> float | None:
    return float(statistics.median(xs)) if xs else None


@dataclass
class EvalReport:
    target_id: str
    vina_avg: float | None = None
    vina_med: float | None = None
    high_affinity: float | None = None
    diversity: float | None = None
    size_avg: float | None = None
    size_med: float | None = None
    validity: float | None = None
    improvement_avg: float | None = None
    improvement_med: float | None = None
    relevance_group: str | None = None
    n_molecules: int = 0
    n_scored: int = 0
    n_missing: int = 0
    notes: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


METRICS = ("vina_avg", "vina_med", "high_affinity", "diversity", "size_avg", "size_med", "validity",
           "improvement_avg", "improvement_med")


def evaluate_target(target_id: str, molecules: Sequence[Molecule], scores: Sequence[ScoreRecord], *,
                    reference_score: float | None = None, baseline_scores: Sequence[float] = (),
                    validity: float | None = None, relevance_group: str | None = None) -> EvalReport:
    """Metric bundle for one target; molecules without a docking score are left out of score metrics."""
    rep = EvalReport(target_id, validity=validity, relevance_group=relevance_group,
                     n_molecules=len(molecules))
    dock = {s.canonical_smiles: s.value for s in scores if s.score_kind is ScoreKind.VINA_DOCK}
    values = [dock[m.canonical_smiles] for m in molecules if m.canonical_smiles in dock]
    rep.n_scored = len(values)
    rep.n_missing = len(molecules) - len(values)
    rep.vina_avg, rep.vina_med = _mean(values), _median(values)
    if values and reference_score is not None:
        rep.high_affinity = high_affinity_fraction(values, reference_score)
    if values and baseline_scores:
        imps = [improvement_over_baseline(v, baseline_scores) for v in values]
        rep.improvement_avg, rep.improvement_med = _mean(imps), _median(imps)
        rep.notes["improvement"] = "per-molecule improvement, then mean/median within the target"
    sizes = [float(m.heavy_atom_count) for m in molecules]
    rep.size_avg, rep.size_med = _mean(sizes), _median(sizes)
    if len(molecules) >= 2:
        rep.diversity = diversity(molecules)
    return rep


def aggregate_targets(reports: Sequence[EvalReport]) -> dict[str, dict[str, float | int | None]]:
    """Mean and median of each per-target metric across targets, with the count used."""
    if not reports:
        raise Empty("no reports")
    out: dict[str, dict[str, float | int | None]] = {}
    for name in METRICS:
        xs = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        out[name] = {"avg": _mean(xs), "med": _median(xs), "n": len(xs)}
    return out


# ---------------------------------------------------------------------------
# similarity to context


@dataclass(frozen=True)
class SimilarityAnalysis:
    pairs: tuple[tuple[str, str, float], ...]  # context, generated, similarity
    histogram: tuple[int, ...]                 # counts per HIST_BIN-wide bin over [0, 1]

    @property
    def bin_edges(self) -> tuple[float, ...]:
        return tuple(round(i * HIST_BIN, 10) for i in range(len(self.histogram) + 1))


def similarity_histogram(values: Iterable[float], width: float = HIST_BIN) -> tuple[int, ...]:
    n_bins = round(1 / width)
    counts = [0] * n_bins
    for v in values:
        counts[min(n_bins - 1, max(0, int(v / width)))] += 1
    return tuple(counts)


def context_similarity_analysis(generated: Sequence[Molecule], context_rows: Sequence[ActivityRow],
                                context_scores: Sequence[ScoreRecord],
                                reference_score: float) -> SimilarityAnalysis:
    """Tanimoto similarity of every generated molecule to every context molecule that beats the reference."""
    dock = {s.canonical_smiles: s.value for s in context_scores if s.score_kind is ScoreKind.VINA_DOCK}
    high: dict[str, Molecule] = {}
    for row in context_rows:
        try:
            mol = parse_smiles(row.smiles)
        except SmilesError:
            continue
        score = dock.get(mol.canonical_smiles)
        if score is not None and score < reference_score:
            high.setdefault(mol.canonical_smiles, mol)
    if not high:
        raise NoHighScoringContext("no context molecule scores better than the reference")
    ctx_fps = [(s, morgan_fingerprint(m)) for s, m in high.items()]
    pairs = []
    for g in generated:
        gfp = morgan_fingerprint(g)
        for s, fp in ctx_fps:
            pairs.append((s, g.canonical_smiles, tanimoto(fp, gfp)))
    return SimilarityAnalysis(tuple(pairs), similarity_histogram(p[2] for p in pairs))


def write_report_table(path: str | Path, reports: Sequence[EvalReport]) -> None:
    names = [f.name for f in fields(EvalReport) if f.name != "notes"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for r in reports:
            w.writerow(["" if getattr(r, n) is None else getattr(r, n) for n in names])


def baseline_values(records: Sequence[ScoreRecord]) -> list[float]:
    return [r.value for r in records if r.score_kind is ScoreKind.VINA_DOCK]


def index_scores(records: Sequence[ScoreRecord]) -> Mapping[str, float]:
    return {r.canonical_smiles: r.value for r in records if r.score_kind is ScoreKind.VINA_DOCK}
