"""In-memory flat vector index with exact cosine top-k and file persistence.

The index is immutable once built. Search is an exact scan: a float32
matrix-vector product preselects a candidate set with a safety margin wide
enough to provably contain the true top-k, and the final ordering is
computed from the full-precision float64 vectors. Ties are broken by
chunk_id ascending, so results are independent of insertion order.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import EMBED_DIM
from .errors import IndexLoadError
from .ingest import ChunkRecord

_MAGIC = "docrag-index"
_VERSION = 1

# Float32 preselection can misrank cosines by at most ~384 * 2^-24 ≈ 2.3e-5;
# the margin is two orders of magnitude wider than that.
_PRESELECT_MARGIN = 5e-3


@dataclass(frozen=True)
class RetrievalCandidate:
    chunk_id: str
    bi: float
    cross: float | None
    rank: int


class VectorIndex:
    """Immutable store of (ChunkRecord, embedding) pairs with exact top-k."""

    def __init__(self, chunks, vectors, embedder_id: str, built_at: float | None = None):
        chunks = tuple(chunks)
        ids = [c.chunk_id for c in chunks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate chunk_ids in index")
        if len(vectors) != len(chunks):
            raise ValueError("one vector required per chunk")
        matrix = np.zeros((len(chunks), EMBED_DIM), dtype=np.float64)
        for i, vec in enumerate(vectors):
            v = np.asarray(vec, dtype=np.float64)
            if v.shape != (EMBED_DIM,):
                raise ValueError(f"vector {i} has shape {v.shape}, expected ({EMBED_DIM},)")
            matrix[i] = v
        self._chunks = chunks
        self._matrix = matrix
        self._matrix32 = matrix.astype(np.float32)
        self._by_id = {c.chunk_id: i for i, c in enumerate(chunks)}
        self.embedder_id = embedder_id
        self.built_at = time.time() if built_at is None else built_at

    def __len__(self) -> int:
        return len(self._chunks)

    @property
    def chunks(self) -> tuple[ChunkRecord, ...]:
        return self._chunks

    def chunk(self, chunk_id: str) -> ChunkRecord:
        return self._chunks[self._by_id[chunk_id]]

    def vector(self, chunk_id: str) -> np.ndarray:
        return self._matrix[self._by_id[chunk_id]].copy()


def build_index(chunks, embed_backend, batch_size: int = 128) -> VectorIndex:
    """Embed every chunk (batched, order-preserving) and assemble an index.

    Backend failures propagate and leave no partially built index behind.
    """
    chunks = list(chunks)
    vectors: list[np.ndarray] = []
    for i in range(0, len(chunks), batch_size):
        batch = chunks[i : i + batch_size]
        vectors.extend(embed_backend.embed([c.text for c in batch]))
    return VectorIndex(chunks, vectors, embedder_id=embed_backend.embedder_id)


def _validate_query(query_vec: np.ndarray) -> np.ndarray:
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (EMBED_DIM,):
        raise ValueError(f"query vector has shape {q.shape}, expected ({EMBED_DIM},)")
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > 1e-3:
        raise ValueError(f"query vector must be unit-norm, got |q| = {norm:.6f}")
    return q


def top_k(index: VectorIndex, query_vec: np.ndarray, k: int) -> list[RetrievalCandidate]:
    """Exact cosine top-k, sorted by score descending then chunk_id ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = _validate_query(query_vec)
    n = len(index)
    if n == 0:
        return []

    sims32 = index._matrix32 @ q.astype(np.float32)
    if k >= n:
        cand = np.arange(n)
    else:
        threshold = np.partition(sims32, n - k)[n - k]
        cand = np.flatnonzero(sims32 >= threshold - _PRESELECT_MARGIN)

    # Exact rescoring of the preselected superset in float64. The sort key is
    # the bi score itself (not the raw cosine): mapping through (1 + cos) / 2
    # can collapse cosines one ulp apart, so raw-cosine order would split tie
    # groups that the reported scores show as equal.
    sims = index._matrix[cand] @ q
    bis = [min(1.0, max(0.0, (1.0 + cos) / 2.0)) for cos in sims]
    order = sorted(range(len(cand)), key=lambda j: (-bis[j], index._chunks[cand[j]].chunk_id))
    return [
        RetrievalCandidate(
            chunk_id=index._chunks[cand[j]].chunk_id, bi=bis[j], cross=None, rank=rank
        )
        for rank, j in enumerate(order[: min(k, n)])
    ]


def _chunk_to_json(c: ChunkRecord) -> dict:
    return {
        "chunk_id": c.chunk_id,
        "doc_id": c.doc_id,
        "seq": c.seq,
        "text": c.text,
        "token_range": list(c.token_range),
        "char_range": list(c.char_range),
        "page": c.page,
    }


def _chunk_from_json(d: dict) -> ChunkRecord:
    return ChunkRecord(
        chunk_id=d["chunk_id"],
        doc_id=d["doc_id"],
        seq=d["seq"],
        text=d["text"],
        token_range=tuple(d["token_range"]),
        char_range=tuple(d["char_range"]),
        page=d["page"],
    )


def persist(index: VectorIndex, path: str | Path) -> None:
    """Write the index as a header line plus one JSON record per chunk.

    Floats are serialized with shortest-round-trip precision, so a
    persist/load cycle reproduces the embedding matrix bit for bit.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "magic": _MAGIC,
            "version": _VERSION,
            "dim": EMBED_DIM,
            "count": len(index),
            "embedder_id": index.embedder_id,
            "built_at": index.built_at,
        }
        fh.write(json.dumps(header) + "\n")
        for i, chunk in enumerate(index.chunks):
            record = {"chunk": _chunk_to_json(chunk), "embedding": index._matrix[i].tolist()}
            fh.write(json.dumps(record) + "\n")


def load(path: str | Path) -> VectorIndex:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            first = fh.readline()
            if not first.strip():
                raise IndexLoadError(f"{path}: empty or truncated index file")
            try:
                header = json.loads(first)
            except ValueError as exc:
                raise IndexLoadError(f"{path}: unreadable header: {exc}") from exc
            if header.get("magic") != _MAGIC:
                raise IndexLoadError(f"{path}: not an index file (bad magic)")
            if header.get("version") != _VERSION:
                raise IndexLoadError(f"{path}: unsupported version {header.get('version')}")
            if header.get("dim") != EMBED_DIM:
                raise IndexLoadError(f"{path}: dimension {header.get('dim')} != {EMBED_DIM}")
            count = header.get("count")
            if not isinstance(count, int) or count < 0:
                raise IndexLoadError(f"{path}: bad count {count!r}")

            chunks, vectors = [], []
            for i in range(count):
                line = fh.readline()
                if not line:
                    raise IndexLoadError(f"{path}: truncated at record {i} of {count}")
                try:
                    record = json.loads(line)
                    chunks.append(_chunk_from_json(record["chunk"]))
                    vectors.append(np.asarray(record["embedding"], dtype=np.float64))
                except (ValueError, KeyError, TypeError) as exc:
                    raise IndexLoadError(f"{path}: bad record {i}: {exc}") from exc
    except OSError as exc:
        raise IndexLoadError(f"{path}: {exc}") from exc
    try:
        return VectorIndex(
            chunks, vectors, embedder_id=header["embedder_id"], built_at=header.get("built_at")
        )
    except (ValueError, KeyError) as exc:
        raise IndexLoadError(f"{path}: inconsistent index data: {exc}") from exc
