import random

import numpy as np
import pytest

from docrag.encoders import reference_embed, token_overlap_f1
from docrag.ingest import ChunkingConfig, Document, split
from docrag.stubserver import StubServer


@pytest.fixture
def stub_server():
    with StubServer() as server:
        yield server


def make_document(tokens: list[str], doc_id: str = "doc") -> Document:
    return Document(doc_id=doc_id, name=doc_id, text=" ".join(tokens))


def random_chunks(rng: random.Random, n_chunks: int, vocab: list[str], chunk_tokens: int = 8):
    """Build exactly n_chunks non-overlapping chunks of random vocab tokens."""
    tokens = [rng.choice(vocab) for _ in range(n_chunks * chunk_tokens)]
    doc = make_document(tokens, doc_id=f"c{rng.randrange(10**6)}")
    config = ChunkingConfig(chunk_size=chunk_tokens, overlap=0)
    chunks = split(doc, config)
    assert len(chunks) == n_chunks
    return chunks


def oracle_bi_scores(chunks, query_vec) -> list[float]:
    """Brute-force bi scores for every chunk, from a freshly built matrix.

    Scoring goes through one matrix-vector product because per-row matvec
    results are position- and subset-independent bitwise, which makes exact
    tie comparison against the engine well-defined; per-row np.dot differs
    in the last ulp and would split mathematically tied groups.
    """
    matrix = np.vstack([reference_embed(c.text) for c in chunks])
    cosines = matrix @ np.asarray(query_vec, dtype=np.float64)
    return [min(1.0, max(0.0, (1.0 + float(cos)) / 2.0)) for cos in cosines]


def oracle_top_k_ids(chunks, query_vec, k: int) -> list[str]:
    """Independent stage-1 oracle: score all, full sort, take k."""
    scores = oracle_bi_scores(chunks, query_vec)
    order = sorted(zip(chunks, scores), key=lambda pair: (-pair[1], pair[0].chunk_id))
    return [c.chunk_id for c, _ in order[:k]]


def oracle_two_stage_ids(chunks, query: str, k: int, m: int) -> list[str]:
    """Independent two-stage oracle: full cosine sort -> top k -> full cross sort -> top m."""
    query_vec = reference_embed(query)
    scores = oracle_bi_scores(chunks, query_vec)
    stage1 = sorted(zip(chunks, scores), key=lambda pair: (-pair[1], pair[0].chunk_id))[:k]
    crossed = [(c, token_overlap_f1(query, c.text)) for c, _ in stage1]
    crossed.sort(key=lambda pair: (-pair[1], pair[0].chunk_id))
    return [c.chunk_id for c, _ in crossed[:m]]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid and getattr(report, "when", "call") == "call":
                lines.append((nodeid.split("::")[-1], outcome.upper()))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, outcome in sorted(lines):
            terminalreporter.write_line(f"{outcome:<7} {name}")
