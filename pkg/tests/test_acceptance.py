"""Acceptance suite: one test per shipping criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints
one pass/fail line per criterion. Everything here uses the reference
backends and the bundled stub model server; no network or keys required.
"""

import json
import os
import random
import subprocess
import sys
import threading
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from docrag.config import AppConfig
from docrag.encoders import ReferenceBiEncoder, ReferenceCrossEncoder
from docrag.evalbench import bench_scalability, load_eval_questions, load_reference_grades, measure_exec, report_from_grades
from docrag.index import build_index
from docrag.ingest import ChunkingConfig, load_document, load_text_file, split
from docrag.llm import LlmConfig
from docrag.pipeline import RetrievalConfig, retrieve, retrieve_stage1_only
from docrag.prompts import ModelInstanceText, RuleResult, completeness_prompt, feedback_workflow, improvement_prompt, qa_prompt, render_context_blocks
from docrag.service import create_app
from docrag.stubserver import StubServer

from conftest import oracle_two_stage_ids, random_chunks

WORDS = ["fault", "brake", "sensor", "torque", "camera", "signal", "voltage",
         "relay", "clutch", "monitor", "latency", "frame"]

FIXTURE_DIR = Path(__file__).parent.parent / "src" / "docrag" / "fixtures"


# ---------------------------------------------------------------------------
# 1. Two-stage retrieval equals the brute-force oracle, including tie order
# ---------------------------------------------------------------------------

def test_a01_two_stage_oracle_equivalence():
    """>= 100 randomized corpora up to 10,000 chunks; exact match, exact ties."""
    rng = random.Random(20240901)
    sizes = [rng.randint(2, 400) for _ in range(88)]
    sizes += [800, 1000, 1200, 1500, 2000, 2500, 3000, 4000, 6000, 8000, 9000, 10000]
    assert len(sizes) >= 100

    config = RetrievalConfig(k=32, m=3)
    checked = 0
    for size in sizes:
        vocab = rng.sample(WORDS, rng.randint(3, 10))
        chunk_tokens = rng.randint(2, 6)
        chunks = random_chunks(rng, size, vocab, chunk_tokens)
        index = build_index(chunks, ReferenceBiEncoder())
        query = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 5)))
        contexts, _ = retrieve(index, query, config,
                               ReferenceBiEncoder(), ReferenceCrossEncoder())
        expected = oracle_two_stage_ids(chunks, query, 32, 3)
        got = [c.chunk_id for c in contexts]
        assert got == expected, f"corpus of {size} chunks, query {query!r}: {got} != {expected}"
        checked += 1
    assert checked == 100


# ---------------------------------------------------------------------------
# 2. Subset and cardinality properties over random (k, m, corpus) triples
# ---------------------------------------------------------------------------

def test_a02_subset_and_cardinality():
    """result ids are a subset of stage-1 top-k and |result| = min(m, k, n)."""
    rng = random.Random(7321)
    cases = 0
    for _ in range(1000):
        n = rng.randint(0, 40)
        k = rng.randint(1, 50)
        m = rng.randint(1, 50)
        vocab = rng.sample(WORDS, rng.randint(2, 6))
        chunks = random_chunks(rng, n, vocab, chunk_tokens=3) if n else []
        index = build_index(chunks, ReferenceBiEncoder())
        query = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 4)))
        bi = ReferenceBiEncoder()
        shortlist = {c.chunk_id for c in retrieve_stage1_only(index, query, k, bi)} if n else set()
        contexts, _ = retrieve(index, query, RetrievalConfig(k=k, m=m),
                               bi, ReferenceCrossEncoder())
        assert {c.chunk_id for c in contexts} <= shortlist or n == 0
        assert len(contexts) == min(m, k, n)
        cases += 1
    assert cases == 1000


# ---------------------------------------------------------------------------
# 3. Chunking round-trip
# ---------------------------------------------------------------------------

def test_a03_chunking_round_trip():
    """Dropping each later chunk's leading overlap tokens rebuilds the stream."""
    rng = random.Random(99)
    separators = [" ", "  ", "\n", "\t", " \n "]
    for _ in range(500):
        count = rng.randint(0, 400)
        tokens = [rng.choice(WORDS) for _ in range(count)]
        text = ""
        for i, token in enumerate(tokens):
            text += (rng.choice(separators) if i else "") + token
        chunk_size = rng.randint(1, 60)
        overlap = rng.randint(0, chunk_size - 1)
        config = ChunkingConfig(chunk_size=chunk_size, overlap=overlap)
        doc = load_document("d", text)
        chunks = split(doc, config)
        rebuilt = []
        for i, chunk in enumerate(chunks):
            parts = chunk.text.split()
            rebuilt.extend(parts if i == 0 else parts[overlap:])
        assert rebuilt == tokens


# ---------------------------------------------------------------------------
# 4. Reference grade aggregation reproduces the published overall row
# ---------------------------------------------------------------------------

def test_a04_grade_aggregation_reproduction():
    """Injected per-question reference grades sum to (2, 1.5, 4.5, 2) exactly."""
    grades, exec_times = load_reference_grades()
    report = report_from_grades(grades, exec_times=exec_times)
    overall = {row.model_name: row.overall_score for row in report.rows}
    assert overall == {"llama3": 2.0, "mixtral": 1.5, "gpt-4o": 4.5, "mistral": 2.0}
    # latency row ships as a display fixture only; it is not reproduced here
    assert {row.model_name: row.mean_exec_time for row in report.rows} == {
        "llama3": 19.7, "mixtral": 132.38, "gpt-4o": 19.06, "mistral": 10.93,
    }


# ---------------------------------------------------------------------------
# 5. Timing harness returns an injected constant delay within +10%/-0%
# ---------------------------------------------------------------------------

def test_a05_timing_harness_correctness():
    delay = 0.2
    questions = load_eval_questions()
    doc = load_text_file(FIXTURE_DIR / "demo_standard.md")
    index = build_index(split(doc, ChunkingConfig()), ReferenceBiEncoder())
    prompts = []
    for q in questions:
        contexts, _ = retrieve(index, q.question, RetrievalConfig(),
                               ReferenceBiEncoder(), ReferenceCrossEncoder())
        prompts.append(qa_prompt(q.question, contexts))
    assert len(prompts) == 5

    with StubServer(delay=delay) as server:
        mean = measure_exec(LlmConfig(base_url=server.base_url), prompts, runs=3)
    assert delay <= mean <= delay * 1.10, f"measured mean {mean:.4f}s for injected {delay}s"


# ---------------------------------------------------------------------------
# 6. Scalability bench trend (shape, not absolutes)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def bench_records():
    return bench_scalability(page_counts=[901, 3031, 5162, 7293], search_runs=3)


def test_a06a_bench_indexing_trend(bench_records):
    """Indexing time strictly increasing with a linear fit of R^2 >= 0.95."""
    times = [r.indexing_time for r in bench_records]
    pages = [r.pages for r in bench_records]
    assert all(a < b for a, b in zip(times, times[1:])), times
    r_squared = float(np.corrcoef(pages, times)[0, 1] ** 2)
    assert r_squared >= 0.95, f"R^2 = {r_squared:.4f} for {times}"


def test_a06b_bench_search_flatness(bench_records):
    """Search time max/min <= 1.25 across corpus sizes."""
    times = [r.search_time for r in bench_records]
    assert all(t is not None for t in times)
    ratio = max(times) / min(times)
    detail = ", ".join(f"{r.pages}p: {t * 1e3:.2f}ms" for r, t in zip(bench_records, times))
    assert ratio <= 1.25, f"search_time max/min = {ratio:.3f} ({detail})"


def test_a06c_bench_work_counts(bench_records):
    """Embed calls equal chunk count; per-query cross calls equal min(32, n)."""
    for r in bench_records:
        assert r.embed_calls == r.chunk_count, (r.pages, r.embed_calls, r.chunk_count)
        assert r.bi_calls_per_query == 1
        assert r.cross_calls_per_query == min(32, r.chunk_count)
    # chunk counts from the splitter arithmetic
    assert [r.chunk_count for r in bench_records] == [1802, 6062, 10324, 14586]


# ---------------------------------------------------------------------------
# 7. Prompt template fidelity
# ---------------------------------------------------------------------------

def test_a07_prompt_template_fidelity():
    from docrag.pipeline import ContextChunk

    contexts = [ContextChunk(chunk_id="d#0", doc_id="d", page=2, text="guidance text",
                             bi=0.8, cross=0.4, rank=0)]
    blocks = render_context_blocks(contexts)

    improve = improvement_prompt(ModelInstanceText("M"), RuleResult("r", "R", "fail"), contexts)
    assert improve.text == f"What to do to improve M if rule is not satisfied R based on {blocks}?"

    complete = completeness_prompt("emergency braking", ModelInstanceText("M"), contexts)
    assert complete.text == f"Are emergency braking requirements complete for M based on {blocks} as reference?"

    # placeholder elimination under fuzzed inputs
    placeholders = ("[model instance]", "[failing rule]", "[retrieved context]", "[scenario]")
    rng = random.Random(5150)
    alphabet = "abcdefghij klmnop()«»:;.!?0123456789-_/"
    for _ in range(300):
        rand = lambda: "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 50)))
        ctx = [ContextChunk(chunk_id="d#0", doc_id="d", page=None, text=rand(),
                            bi=0.5, cross=0.1, rank=0)]
        outputs = [
            improvement_prompt(ModelInstanceText(rand()), RuleResult("r", rand(), "fail"), ctx).text,
            completeness_prompt(rand(), ModelInstanceText(rand()), ctx).text,
            qa_prompt(rand(), ctx).text,
        ]
        for text in outputs:
            for marker in placeholders:
                assert marker not in text


# ---------------------------------------------------------------------------
# 8. Feedback phase law
# ---------------------------------------------------------------------------

def test_a08_feedback_phase_law():
    """phase == completeness iff zero failing rules; prompt count == failures."""
    from docrag.pipeline import ContextChunk

    def retriever(query):
        return [ContextChunk(chunk_id="d#0", doc_id="d", page=None,
                             text=f"context for {query}", bi=0.5, cross=0.1, rank=0)]

    rng = random.Random(31337)
    for _ in range(500):
        statuses = [rng.choice(["pass", "fail"]) for _ in range(rng.randint(1, 15))]
        rules = [RuleResult(f"r{i}", f"rule {i}", s) for i, s in enumerate(statuses)]
        plan = feedback_workflow(ModelInstanceText("M"), rules, "scenario", retriever)
        failures = statuses.count("fail")
        assert (plan.phase == "completeness") == (failures == 0)
        assert len(plan.prompts) == (1 if failures == 0 else failures)


# ---------------------------------------------------------------------------
# 9. Service snapshot atomicity under concurrent upload/query load
# ---------------------------------------------------------------------------

def test_a09_snapshot_atomicity():
    app = create_app(AppConfig())
    seed_client = TestClient(app)
    seed = seed_client.post("/v1/documents", json={
        "name": "seed", "text": "fault detection interval guidance " * 40})
    assert seed.status_code == 200

    errors = []
    mixed_generation_responses = []
    query_count = [0]
    lock = threading.Lock()

    def uploader(worker: int):
        client = TestClient(app)
        for i in range(5):
            response = client.post("/v1/documents", json={
                "name": f"doc-{worker}-{i}",
                "text": f"extra guidance {worker} {i} " + "brake torque sensor " * 20,
            })
            if response.status_code != 200:
                errors.append(("upload", response.status_code))

    def querier(worker: int):
        client = TestClient(app)
        for _ in range(15):
            response = client.post("/v1/query", json={"question": "fault detection"})
            if response.status_code != 200:
                errors.append(("query", response.status_code))
                continue
            body = response.json()
            generations = {c["generation"] for c in body["contexts"]}
            generations.add(body["generation"])
            if len(generations) != 1:
                mixed_generation_responses.append(generations)
            with lock:
                query_count[0] += 1

    threads = [threading.Thread(target=uploader, args=(w,)) for w in range(3)]
    threads += [threading.Thread(target=querier, args=(w,)) for w in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert not errors, errors[:5]
    assert query_count[0] == 90  # + 15 uploads = 105 interleaved requests
    assert mixed_generation_responses == []


# ---------------------------------------------------------------------------
# 10. End-to-end offline demo through the CLI with a stub chat model
# ---------------------------------------------------------------------------

SENTINELS = {
    "q1": "software parameter values",
    "q2": "over voltage",
    "q3": "select code variants",
    "q4": "cascading",
    "q5": "FDTI",
}


def _run_cli(args, env, cwd):
    return subprocess.run(
        [sys.executable, "-m", "docrag", *args],
        capture_output=True, text=True, env=env, cwd=cwd, timeout=120,
    )


def test_a10_offline_demo_cli(tmp_path):
    """Ingest the bundled handbook; the planted passage surfaces for >= 4/5 questions."""
    with StubServer() as server:
        env = dict(os.environ)
        env["RAG_LLM_BASE_URL"] = server.base_url
        env["RAG_LLM_MODEL"] = "offline-stub"
        data_dir = str(tmp_path / "state")

        ingest = _run_cli(
            ["ingest", str(FIXTURE_DIR / "demo_standard.md"),
             "--data-dir", data_dir, "--json"],
            env, str(tmp_path),
        )
        assert ingest.returncode == 0, ingest.stderr
        assert json.loads(ingest.stdout)["chunk_count"] > 0

        hits = 0
        for item in load_eval_questions():
            result = _run_cli(
                ["query", item.question, "--data-dir", data_dir, "--json"],
                env, str(tmp_path),
            )
            assert result.returncode == 0, result.stderr
            body = json.loads(result.stdout)
            assert body["answer"], "stub chat model should have produced an answer"
            assert len(body["contexts"]) == 3
            if any(SENTINELS[item.question_id] in c["text"] for c in body["contexts"]):
                hits += 1
        assert hits >= 4, f"planted passages found for only {hits}/5 questions"
