"""HTTP service: ingestion, grounded chat queries, copilot feedback, eval, bench.

The service owns one index snapshot at a time. Ingestion rebuilds the index
over every registered document and swaps the snapshot atomically, so a query
always sees exactly one generation; the generation id is echoed on every
context so clients can verify that. Errors are JSON problem documents
``{code, message, detail}``.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import evalbench
from .config import AppConfig
from .encoders import make_bi_encoder, make_cross_encoder
from .errors import (
    BackendProtocolError,
    BackendTransportError,
    DocRagError,
    GroundingError,
    LlmTimeoutError,
    PageMarkerError,
)
from .evalbench import GradeRecord, report_from_grades, report_json
from .index import VectorIndex, build_index
from .ingest import Document, PageMarker, load_document, split
from .llm import LlmConfig, complete
from .pipeline import RetrievalConfig, retrieve
from .prompts import ModelInstanceText, RuleResult, feedback_workflow, qa_prompt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Snapshot:
    generation: int
    index: VectorIndex


class PageMarkerIn(BaseModel):
    page: int
    start_char: int
    end_char: int


class DocumentIn(BaseModel):
    name: str
    text: str
    page_markers: list[PageMarkerIn] | None = None


class QueryIn(BaseModel):
    question: str
    k: int | None = None
    m: int | None = None


class RuleIn(BaseModel):
    rule_id: str
    rule_text: str
    status: str


class FeedbackIn(BaseModel):
    model_instance: str
    rules: list[RuleIn]
    scenario: str
    format_hint: str = ""
    execute: bool = False


class EvalRunIn(BaseModel):
    models: list[str] | None = None
    heuristic: bool = False


class BenchIn(BaseModel):
    pages: list[int] | None = None
    words_per_page: int = 500
    search_runs: int = 3


class ServiceState:
    """Mutable service state; snapshot replacement is a single atomic store."""

    def __init__(self, config: AppConfig, bi_encoder=None, cross_encoder=None):
        self.config = config
        self.bi = bi_encoder or make_bi_encoder(config.embed_backend)
        self.cross = cross_encoder or make_cross_encoder(config.rerank_backend)
        self.snapshot: Snapshot | None = None
        self.documents: dict[str, Document] = {}
        self.ingest_lock = threading.Lock()
        self.run_lock = threading.Lock()  # guards eval/bench exclusivity
        self.grades: list[GradeRecord] = []
        self.exec_times: dict[str, float] = {}
        self.run_models: list[str] = []

    def ingest(self, doc: Document) -> int:
        """Register a document and atomically swap in a rebuilt snapshot."""
        with self.ingest_lock:
            chunks = []
            for existing in self.documents.values():
                chunks.extend(split(existing, self.config.chunking))
            own_chunks = split(doc, self.config.chunking)
            chunks.extend(own_chunks)
            if chunks:
                index = build_index(chunks, self.bi)
                generation = (self.snapshot.generation if self.snapshot else 0) + 1
                new_snapshot = Snapshot(generation=generation, index=index)
            else:
                new_snapshot = self.snapshot  # would be empty-only: keep serving as-is
            self.documents[doc.doc_id] = doc
            self.snapshot = new_snapshot
            return len(own_chunks)


def _problem(status: int, code: str, message: str, detail: str | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"code": code, "message": message, "detail": detail}
    )


def create_app(config: AppConfig | None = None, bi_encoder=None, cross_encoder=None) -> FastAPI:
    config = config or AppConfig()
    state = ServiceState(config, bi_encoder, cross_encoder)
    app = FastAPI(title="docrag", version="0.1.0")
    app.state.docrag = state

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    if config.api_key:

        @app.middleware("http")
        async def require_api_key(request: Request, call_next):
            if request.method != "OPTIONS" and request.headers.get("x-api-key") != config.api_key:
                return _problem(401, "unauthorized", "missing or wrong X-API-Key header")
            return await call_next(request)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _problem(400, "invalid-body", "request body failed validation", str(exc.errors()))

    @app.exception_handler(DocRagError)
    async def on_docrag_error(request: Request, exc: DocRagError):
        if isinstance(exc, LlmTimeoutError):
            return _problem(504, "llm-timeout", str(exc))
        if isinstance(exc, (BackendTransportError, BackendProtocolError)):
            return _problem(502, "backend-failure", str(exc))
        if isinstance(exc, GroundingError):
            return _problem(409, "no-context", str(exc))
        if isinstance(exc, PageMarkerError):
            return _problem(400, "invalid-page-markers", str(exc))
        return _problem(500, "internal", str(exc))

    @app.exception_handler(ValueError)
    async def on_value_error(request: Request, exc: ValueError):
        return _problem(400, "invalid-argument", str(exc))

    @app.get("/v1/status")
    def status():
        snap = state.snapshot
        return {
            "documents": len(state.documents),
            "chunks": len(snap.index) if snap else 0,
            "generation": snap.generation if snap else None,
            "llm_configured": state.config.llm is not None,
        }

    @app.post("/v1/documents")
    def post_document(body: DocumentIn):
        markers = None
        if body.page_markers is not None:
            markers = [PageMarker(m.page, m.start_char, m.end_char) for m in body.page_markers]
        doc = load_document(body.name, body.text, markers)
        chunk_count = state.ingest(doc)  # backend failures propagate -> 502, snapshot kept
        logger.info("ingested %s (%d chunks)", doc.doc_id, chunk_count)
        return {"doc_id": doc.doc_id, "chunk_count": chunk_count}

    @app.post("/v1/query")
    def post_query(body: QueryIn):
        snap = state.snapshot
        if snap is None:
            return _problem(409, "no-index", "no document ingested yet; upload one first")
        retrieval = RetrievalConfig(
            k=body.k if body.k is not None else config.retrieval.k,
            m=body.m if body.m is not None else config.retrieval.m,
        )
        contexts, timings = retrieve(snap.index, body.question, retrieval, state.bi, state.cross)

        answer = None
        llm_latency = None
        if config.llm is not None:
            prompt = qa_prompt(body.question, contexts)
            result = complete(config.llm, prompt)
            answer = result.text
            llm_latency = result.latency

        return {
            "answer": answer,
            "generation": snap.generation,
            "contexts": [
                {
                    "chunk_id": c.chunk_id,
                    "doc_id": c.doc_id,
                    "page": c.page,
                    "text": c.text,
                    "bi": c.bi,
                    "cross": c.cross,
                    "rank": c.rank,
                    "generation": snap.generation,
                }
                for c in contexts
            ],
            "timings": {
                "encode_query": timings.encode_query,
                "stage1_scan": timings.stage1_scan,
                "stage2_rerank": timings.stage2_rerank,
                "total_search": timings.total_search,
                "llm": llm_latency,
            },
        }

    @app.post("/v1/feedback")
    def post_feedback(body: FeedbackIn):
        if not body.rules:
            return _problem(400, "invalid-body", "rules must be non-empty")
        snap = state.snapshot
        if snap is None:
            return _problem(409, "no-index", "no document ingested yet; upload one first")
        rules = [RuleResult(r.rule_id, r.rule_text, r.status) for r in body.rules]
        model = ModelInstanceText(content=body.model_instance, format_hint=body.format_hint)

        def retriever(query: str):
            contexts, _ = retrieve(snap.index, query, config.retrieval, state.bi, state.cross)
            return contexts

        plan = feedback_workflow(model, rules, body.scenario, retriever)
        response = {
            "phase": plan.phase,
            "prompts": [
                {
                    "kind": p.kind,
                    "text": p.text,
                    "context_refs": list(p.context_refs),
                    "template_version": p.template_version,
                }
                for p in plan.prompts
            ],
        }
        if body.execute:
            if config.llm is None:
                return _problem(503, "llm-unconfigured", "no chat model configured")
            answers = [complete(config.llm, p) for p in plan.prompts]
            response["answers"] = [
                {"text": a.text, "latency": a.latency, "prompt_ref": a.prompt_ref}
                for a in answers
            ]
        return response

    @app.post("/v1/eval/grades")
    def post_grades(body: list[dict]):
        records = [evalbench.grade_from_dict(g) for g in body]
        state.grades.extend(records)
        return {"stored": len(records), "total": len(state.grades)}

    @app.post("/v1/eval/run")
    def post_eval_run(body: EvalRunIn):
        if config.llm is None:
            return _problem(503, "llm-unconfigured", "no chat model configured")
        snap = state.snapshot
        if snap is None:
            return _problem(409, "no-index", "no document ingested yet; upload one first")
        if not state.run_lock.acquire(blocking=False):
            return _problem(409, "run-in-progress", "an eval or bench run is already in progress")
        try:
            models = body.models or [config.llm.model_name]
            configs = [
                LlmConfig(
                    base_url=config.llm.base_url,
                    model_name=name,
                    temperature=config.llm.temperature,
                    timeout=config.llm.timeout,
                    max_tokens=config.llm.max_tokens,
                    api_key=config.llm.api_key,
                )
                for name in models
            ]
            report = evalbench.run_eval(
                configs,
                snap.index,
                state.bi,
                state.cross,
                manual_grades=state.grades or None,
                heuristic=body.heuristic,
                retrieval=config.retrieval,
            )
            for row in report.rows:
                if row.mean_exec_time is not None:
                    state.exec_times[row.model_name] = row.mean_exec_time
                if row.model_name not in state.run_models:
                    state.run_models.append(row.model_name)
            return report_json(report)
        finally:
            state.run_lock.release()

    @app.get("/v1/eval/report")
    def get_eval_report():
        if not state.grades and not state.run_models:
            return _problem(404, "no-report", "no eval run or grades submitted yet")
        report = report_from_grades(state.grades, exec_times=state.exec_times)
        body = report_json(report)
        graded = {row["model_name"] for row in body["rows"]}
        for model in state.run_models:
            if model not in graded:
                body["rows"].append(
                    {
                        "model_name": model,
                        "scores": {},
                        "overall_score": None,
                        "grading": "ungraded",
                        "mean_exec_time": state.exec_times.get(model),
                    }
                )
        return body

    @app.post("/v1/bench/run")
    def post_bench_run(body: BenchIn):
        if not state.run_lock.acquire(blocking=False):
            return _problem(409, "run-in-progress", "an eval or bench run is already in progress")
        try:
            records = evalbench.bench_scalability(
                page_counts=body.pages or list(evalbench.DEFAULT_PAGE_COUNTS),
                words_per_page=body.words_per_page,
                search_runs=body.search_runs,
            )
            return {"records": evalbench.bench_records_json(records)}
        finally:
            state.run_lock.release()

    return app


def serve(config: AppConfig, host: str = "127.0.0.1", port: int | None = None):
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port or config.port, log_level="info")
