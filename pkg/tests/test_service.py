"""Tests for the HTTP service endpoints."""

import json

import pytest
from fastapi.testclient import TestClient

from docrag.config import AppConfig
from docrag.encoders import BackendConfig
from docrag.evalbench import load_reference_grades
from docrag.llm import LlmConfig
from docrag.service import create_app

DOC = "the fault detection interval measures fault detection " * 30
OTHER = "brake torque limits protect mechanical components " * 30

RULES_TWO_FAILING = [
    {"rule_id": "r1", "rule_text": "camera resolution must be at least 1280", "status": "fail"},
    {"rule_id": "r2", "rule_text": "brake latency below threshold", "status": "pass"},
    {"rule_id": "r3", "rule_text": "fault detection interval bounded", "status": "fail"},
]


@pytest.fixture
def client():
    return TestClient(create_app(AppConfig()))


@pytest.fixture
def llm_client(stub_server):
    config = AppConfig(llm=LlmConfig(base_url=stub_server.base_url, model_name="stub"))
    return TestClient(create_app(config))


def _upload(client, name="handbook", text=DOC, **extra):
    response = client.post("/v1/documents", json={"name": name, "text": text, **extra})
    assert response.status_code == 200, response.text
    return response.json()


# ===================================================================
# documents
# ===================================================================

class TestDocuments:
    def test_upload_returns_positive_chunk_count(self, client):
        body = _upload(client)
        assert body["chunk_count"] > 0
        assert body["doc_id"]
        status = client.get("/v1/status").json()
        assert status == {"documents": 1, "chunks": body["chunk_count"],
                          "generation": 1, "llm_configured": False}

    def test_empty_text_keeps_empty_snapshot(self, client):
        body = _upload(client, text="")
        assert body["chunk_count"] == 0
        assert client.get("/v1/status").json()["generation"] is None
        response = client.post("/v1/query", json={"question": "anything?"})
        assert response.status_code == 409

    def test_upload_with_page_markers(self, client):
        text = "page one words\npage two words"
        markers = [
            {"page": 1, "start_char": 0, "end_char": 15},
            {"page": 2, "start_char": 15, "end_char": len(text)},
        ]
        body = _upload(client, text=text, page_markers=markers)
        assert body["chunk_count"] == 1

    def test_bad_page_markers_rejected(self, client):
        response = client.post(
            "/v1/documents",
            json={"name": "x", "text": "short", "page_markers": [
                {"page": 1, "start_char": 0, "end_char": 9999}]},
        )
        assert response.status_code == 400
        assert response.json()["code"] == "invalid-page-markers"

    def test_invalid_body_is_400_problem(self, client):
        response = client.post("/v1/documents", json={"name": "x"})
        assert response.status_code == 400
        assert response.json()["code"] == "invalid-body"

    def test_backend_failure_keeps_previous_snapshot(self, stub_server):
        config = AppConfig(
            embed_backend=BackendConfig(
                kind="remote", base_url=stub_server.base_url, model_name="m",
                timeout=2.0, retry_count=0,
            )
        )
        client = TestClient(create_app(config))
        _upload(client)
        assert client.get("/v1/status").json()["generation"] == 1

        stub_server.status_override = 500
        response = client.post("/v1/documents", json={"name": "second", "text": OTHER})
        assert response.status_code == 502
        stub_server.status_override = None

        status = client.get("/v1/status").json()
        assert status["generation"] == 1  # old snapshot still serving
        assert status["documents"] == 1
        query = client.post("/v1/query", json={"question": "fault detection"})
        assert query.status_code == 200
        assert query.json()["generation"] == 1


# ===================================================================
# query
# ===================================================================

class TestQuery:
    def test_query_before_ingest_409(self, client):
        response = client.post("/v1/query", json={"question": "what?"})
        assert response.status_code == 409
        assert response.json()["code"] == "no-index"

    def test_m_1_returns_one_context(self, client):
        _upload(client)
        body = client.post("/v1/query", json={"question": "fault detection", "m": 1}).json()
        assert len(body["contexts"]) == 1

    def test_contexts_carry_scores_and_provenance(self, client):
        _upload(client)
        _upload(client, name="other", text=OTHER)
        body = client.post("/v1/query", json={"question": "fault detection interval"}).json()
        assert body["answer"] is None  # no chat model configured
        for ctx in body["contexts"]:
            assert set(ctx) >= {"chunk_id", "doc_id", "page", "text", "bi", "cross",
                                "rank", "generation"}
            assert ctx["generation"] == body["generation"]
        timings = body["timings"]
        assert timings["total_search"] >= timings["stage2_rerank"]
        assert timings["llm"] is None

    def test_answer_grounded_via_llm(self, llm_client):
        _upload(llm_client)
        body = llm_client.post("/v1/query", json={"question": "What is the fault detection interval?"}).json()
        # echo stub returns the prompt, which embeds the contexts and question
        assert "What is the fault detection interval?" in body["answer"]
        assert body["contexts"][0]["text"] in body["answer"]
        assert body["timings"]["llm"] > 0


# ===================================================================
# feedback
# ===================================================================

class TestFeedback:
    def test_two_failing_rules_two_prompts(self, client):
        _upload(client)
        body = client.post("/v1/feedback", json={
            "model_instance": "vehicle model text",
            "rules": RULES_TWO_FAILING,
            "scenario": "emergency braking",
        }).json()
        assert body["phase"] == "improvement"
        assert len(body["prompts"]) == 2
        assert all(p["kind"] == "improvement" for p in body["prompts"])

    def test_all_passing_gives_completeness(self, client):
        _upload(client)
        rules = [{"rule_id": "r1", "rule_text": "anything", "status": "pass"}]
        body = client.post("/v1/feedback", json={
            "model_instance": "vehicle model", "rules": rules, "scenario": "parking",
        }).json()
        assert body["phase"] == "completeness"
        assert len(body["prompts"]) == 1

    def test_empty_rules_400(self, client):
        _upload(client)
        response = client.post("/v1/feedback", json={
            "model_instance": "m", "rules": [], "scenario": "s",
        })
        assert response.status_code == 400

    def test_execute_returns_answers(self, llm_client):
        _upload(llm_client)
        body = llm_client.post("/v1/feedback", json={
            "model_instance": "vehicle model",
            "rules": RULES_TWO_FAILING,
            "scenario": "emergency braking",
            "execute": True,
        }).json()
        assert len(body["answers"]) == 2
        assert body["answers"][0]["text"] == body["prompts"][0]["text"]  # echo stub

    def test_execute_without_llm_503(self, client):
        _upload(client)
        response = client.post("/v1/feedback", json={
            "model_instance": "m", "rules": RULES_TWO_FAILING, "scenario": "s",
            "execute": True,
        })
        assert response.status_code == 503


# ===================================================================
# eval and bench endpoints
# ===================================================================

class TestEval:
    def test_report_before_any_run_404(self, client):
        assert client.get("/v1/eval/report").status_code == 404

    def test_reference_grades_report(self, client):
        grades, _ = load_reference_grades()
        payload = [
            {"question_id": g.question_id, "model_name": g.model_name,
             "score": g.score, "grader": g.grader}
            for g in grades
        ]
        assert client.post("/v1/eval/grades", json=payload).json()["stored"] == 20
        report = client.get("/v1/eval/report").json()
        overall = {row["model_name"]: row["overall_score"] for row in report["rows"]}
        assert overall == {"llama3": 2.0, "mixtral": 1.5, "gpt-4o": 4.5, "mistral": 2.0}

    def test_bad_grade_rejected(self, client):
        response = client.post("/v1/eval/grades", json=[
            {"question_id": "q1", "model_name": "m", "score": 0.3}])
        assert response.status_code == 400

    def test_eval_run_requires_llm(self, client):
        _upload(client)
        assert client.post("/v1/eval/run", json={}).status_code == 503

    def test_eval_run_heuristic(self, llm_client):
        _upload(llm_client)
        body = llm_client.post("/v1/eval/run", json={"heuristic": True}).json()
        assert len(body["rows"]) == 1
        row = body["rows"][0]
        assert row["grading"] == "heuristic, unconfirmed"
        assert row["mean_exec_time"] is not None
        assert len(row["answers"]) == 5
        report = llm_client.get("/v1/eval/report").json()
        assert any(r["model_name"] == "stub" for r in report["rows"])

    def test_concurrent_run_rejected(self, llm_client):
        _upload(llm_client)
        state = llm_client.app.state.docrag
        assert state.run_lock.acquire(blocking=False)
        try:
            assert llm_client.post("/v1/eval/run", json={}).status_code == 409
            assert llm_client.post("/v1/bench/run", json={"pages": [1]}).status_code == 409
        finally:
            state.run_lock.release()


class TestBench:
    def test_single_size(self, client):
        body = client.post("/v1/bench/run", json={"pages": [2], "words_per_page": 30}).json()
        assert len(body["records"]) == 1
        record = body["records"][0]
        assert record["pages"] == 2
        assert record["embed_calls"] == record["chunk_count"]


# ===================================================================
# auth
# ===================================================================

def test_static_api_key():
    client = TestClient(create_app(AppConfig(api_key="sekret")))
    assert client.get("/v1/status").status_code == 401
    assert client.get("/v1/status", headers={"X-API-Key": "sekret"}).status_code == 200
