"""Two-stage retrieve-and-rerank search.

Stage 1 embeds the query and takes the bi-encoder top k (default 32) by
exact cosine scan; stage 2 rescores the shortlist pairwise with the
cross-encoder and keeps the top m (default 3) as prompt context. Every
output chunk is, by construction, a member of the stage-1 shortlist.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .errors import ConfigurationError
from .index import RetrievalCandidate, VectorIndex, top_k

DEFAULT_K = 32
DEFAULT_M = 3


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = DEFAULT_K
    m: int = DEFAULT_M

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")


@dataclass(frozen=True)
class ContextChunk:
    chunk_id: str
    doc_id: str
    page: int | None
    text: str
    bi: float
    cross: float
    rank: int


@dataclass(frozen=True)
class StageTimings:
    encode_query: float
    stage1_scan: float
    stage2_rerank: float
    total_search: float


def retrieve_stage1_only(index: VectorIndex, query: str, k: int, bi_encoder) -> list[RetrievalCandidate]:
    """Bi-encoder shortlist only: embed the query and run the exact top-k scan."""
    _check_embedder(index, bi_encoder)
    qv = bi_encoder.embed([query])[0]
    return top_k(index, qv, k)


def retrieve(
    index: VectorIndex,
    query: str,
    config: RetrievalConfig,
    bi_encoder,
    cross_encoder,
) -> tuple[list[ContextChunk], StageTimings]:
    """Full two-stage search returning the top-m context chunks plus timings.

    Stage-2 ties are broken by chunk_id ascending. A backend failure during
    either stage propagates; no partial result is returned.
    """
    _check_embedder(index, bi_encoder)
    t_start = time.perf_counter()

    qv = bi_encoder.embed([query])[0]
    t_encoded = time.perf_counter()

    shortlist = top_k(index, qv, config.k)
    t_scanned = time.perf_counter()

    texts = [index.chunk(c.chunk_id).text for c in shortlist]
    cross_scores = cross_encoder.score_batch(query, texts) if shortlist else []
    reranked = sorted(
        zip(shortlist, cross_scores), key=lambda pair: (-pair[1], pair[0].chunk_id)
    )
    m_eff = min(config.m, len(shortlist))
    contexts = []
    for rank, (cand, cross) in enumerate(reranked[:m_eff]):
        chunk = index.chunk(cand.chunk_id)
        contexts.append(
            ContextChunk(
                chunk_id=chunk.chunk_id,
                doc_id=chunk.doc_id,
                page=chunk.page,
                text=chunk.text,
                bi=cand.bi,
                cross=cross,
                rank=rank,
            )
        )
    t_end = time.perf_counter()

    timings = StageTimings(
        encode_query=t_encoded - t_start,
        stage1_scan=t_scanned - t_encoded,
        stage2_rerank=t_end - t_scanned,
        total_search=t_end - t_start,
    )
    return contexts, timings


def _check_embedder(index: VectorIndex, bi_encoder) -> None:
    if index.embedder_id != bi_encoder.embedder_id:
        raise ConfigurationError(
            f"index was built with embedder {index.embedder_id!r} "
            f"but the query backend is {bi_encoder.embedder_id!r}"
        )
