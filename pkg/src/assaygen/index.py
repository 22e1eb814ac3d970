"""Exact cosine top-k search over assay embeddings.

Vectors are stored as float32 and scored in float64.  The on-disk form is a
small binary header (magic, dim, count), the little-endian float32 payload,
and a sidecar ``.aids`` text file with one identifier per line.
"""

from __future__ import annotations

import json
import struct
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .store import BioAssayRecord

MAGIC = b"AGIX0001"
_HEADER = struct.Struct("<8sIQ")
_CHUNK = 1 << 16


class EmbeddingIndexError(ValueError):
    """Base class for index errors."""


class DimMismatch(EmbeddingIndexError):
    pass


class ZeroNorm(EmbeddingIndexError):
    pass


class EmptyIndex(EmbeddingIndexError):
    pass


class EmptySerialization(EmbeddingIndexError):
    pass


class CorruptIndex(EmbeddingIndexError):
    pass


@dataclass(frozen=True, order=True)
class RetrievalHit:
    aid: int
    similarity: float


def _as_vector(v: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("embedding must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding has non-finite components")
    return arr


def cosine(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """``a . b / (|a| |b|)`` in double precision."""
    x, y = _as_vector(a), _as_vector(b)
    if x.shape != y.shape:
        raise DimMismatch(f"{x.size} != {y.size}")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ZeroNorm("cosine undefined for a zero vector")
    return float(np.dot(x, y) / (nx * ny))


def embedding_payload(record: BioAssayRecord) -> str:
    """Canonical JSON text embedded for a record: descriptive fields only, fixed key order."""
    payload = {
        "aid": record.aid, "title": record.title, "description": record.description,
        "protocol": record.protocol, "comment": record.comment,
    }
    return json.dumps(payload, ensure_ascii=False, separators=(", ", ": "))


def embed_record(record: BioAssayRecord, embed: Callable[[str], Sequence[float]]) -> np.ndarray:
    text = embedding_payload(record)
    if not text.strip():
        raise EmptySerialization(record.aid)
    return _as_vector(embed(text))


class EmbeddingIndex:
    """Immutable matrix of assay vectors with exact cosine top-k queries."""

    def __init__(self, aids: Sequence[int], vectors: np.ndarray):
        vectors = np.asarray(vectors)
        if vectors.ndim != 2 or vectors.shape[0] != len(aids):
            raise ValueError("need one vector row per aid")
        if len(set(aids)) != len(aids):
            raise ValueError("duplicate aid in index")
        self.aids = np.asarray(aids, dtype=np.int64)
        self.vectors = vectors.astype(np.float32, copy=False).view()  # read-only view, caller's array untouched
        self.vectors.setflags(write=False)
        norms = self._row_norms()
        if np.any(norms == 0) or not np.all(np.isfinite(norms)):
            raise ZeroNorm("indexed vectors must be finite with positive norm")
        self._norms = norms

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def _row_norms(self) -> np.ndarray:
        out = np.empty(len(self), dtype=np.float64)
        for s in range(0, len(self), _CHUNK):
            block = self.vectors[s:s + _CHUNK].astype(np.float64)
            out[s:s + _CHUNK] = np.linalg.norm(block, axis=1)
        return out

    def similarities(self, query: Sequence[float] | np.ndarray) -> np.ndarray:
        q = _as_vector(query)
        if q.size != self.dim:
            raise DimMismatch(f"query dim {q.size} != index dim {self.dim}")
        nq = np.linalg.norm(q)
        if nq == 0:
            raise ZeroNorm("query vector has zero norm")
        sims = np.empty(len(self), dtype=np.float64)
        for s in range(0, len(self), _CHUNK):
            block = self.vectors[s:s + _CHUNK].astype(np.float64)
            sims[s:s + _CHUNK] = block @ q
        return sims / (self._norms * nq)

    def top_k(self, query: Sequence[float] | np.ndarray, k: int) -> list[RetrievalHit]:
        """Hits by descending similarity, ties broken by ascending aid."""
        if len(self) == 0:
            raise EmptyIndex("index is empty")
        if k <= 0:
            raise ValueError("k must be positive")
        sims = self.similarities(query)
        k = min(k, len(self))
        if k < len(self):
            # everything at least as similar as the k-th best, so tied aids all compete
            kth = np.partition(sims, len(self) - k)[len(self) - k]
            cand = np.flatnonzero(sims >= kth)
        else:
            cand = np.arange(len(self))
        order = cand[np.lexsort((self.aids[cand], -sims[cand]))][:k]
        return [RetrievalHit(int(self.aids[i]), float(sims[i])) for i in order]

    # -- build / merge ------------------------------------------------------

    @classmethod
    def build(cls, records: Iterable[BioAssayRecord],
              embed: Callable[[str], Sequence[float]]) -> EmbeddingIndex:
        aids, rows = [], []
        for rec in records:
            aids.append(rec.aid)
            rows.append(embed_record(rec, embed))
        if not rows:
            raise EmptyIndex("no records to index")
        dims = {r.size for r in rows}
        if len(dims) != 1:
            raise DimMismatch(f"embedder returned mixed dimensions {sorted(dims)}")
        return cls(aids, np.vstack(rows).astype(np.float32))

    @classmethod
    def merge(cls, shards: Sequence[EmbeddingIndex]) -> EmbeddingIndex:
        if not shards:
            raise EmptyIndex("no shards")
        if len({s.dim for s in shards}) != 1:
            raise DimMismatch("shards differ in dimension")
        return cls(np.concatenate([s.aids for s in shards]).tolist(),
                   np.vstack([s.vectors for s in shards]))

    # -- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            fh.write(_HEADER.pack(MAGIC, self.dim, len(self)))
            fh.write(self.vectors.astype("<f4", copy=False).tobytes(order="C"))
        aid_path(path).write_text("".join(f"{a}\n" for a in self.aids.tolist()), encoding="ascii")

    @classmethod
    def load(cls, path: str | Path, mmap: bool = True) -> EmbeddingIndex:
        path = Path(path)
        with path.open("rb") as fh:
            head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise CorruptIndex(f"{path}: truncated header")
        magic, dim, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise CorruptIndex(f"{path}: bad magic {magic!r}")
        expected = _HEADER.size + 4 * dim * count
        if path.stat().st_size != expected:
            raise CorruptIndex(f"{path}: size {path.stat().st_size} != {expected}")
        if mmap and count:
            vectors = np.memmap(path, dtype="<f4", mode="r", offset=_HEADER.size, shape=(count, dim))
        else:
            vectors = np.fromfile(path, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
        aids = [int(line) for line in aid_path(path).read_text(encoding="ascii").split()]
        if len(aids) != count:
            raise CorruptIndex(f"{path}: {len(aids)} aids for {count} vectors")
        return cls(aids, np.asarray(vectors, dtype=np.float32))


def aid_path(index_path: str | Path) -> Path:
    p = Path(index_path)
    return p.with_name(p.name + ".aids")
