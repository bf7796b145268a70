"""Command-line interface: ingest, query, feedback, eval, bench, serve.

Offline-first: reference encoder backends are the default, so everything
except chat completion works with no network and no keys. Remote backends
and the chat model are opted into via ``RAG_*`` environment variables or a
config file. State (document registry + index) lives under ``--data-dir``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evalbench, index as index_mod
from .config import AppConfig, load_config
from .encoders import make_bi_encoder, make_cross_encoder
from .errors import DocRagError
from .ingest import ChunkingConfig, Document, PageMarker, load_text_file, split
from .llm import complete
from .pipeline import RetrievalConfig, retrieve
from .prompts import ModelInstanceText, RuleResult, feedback_workflow, qa_prompt

_INDEX_FILE = "index.jsonl"
_REGISTRY_FILE = "documents.json"


# ---------------------------------------------------------------------------
# On-disk state
# ---------------------------------------------------------------------------


def _load_registry(data_dir: Path) -> dict:
    path = data_dir / _REGISTRY_FILE
    if not path.exists():
        return {"documents": [], "chunking": {}}
    return json.loads(path.read_text(encoding="utf-8"))


def _save_registry(data_dir: Path, registry: dict) -> None:
    data_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / _REGISTRY_FILE).write_text(json.dumps(registry), encoding="utf-8")


def _doc_from_entry(entry: dict) -> Document:
    return Document(
        doc_id=entry["doc_id"],
        name=entry["name"],
        text=entry["text"],
        pages=tuple(PageMarker(p["page"], p["start_char"], p["end_char"]) for p in entry["pages"]),
    )


def _doc_to_entry(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "name": doc.name,
        "text": doc.text,
        "pages": [
            {"page": p.page, "start_char": p.start_char, "end_char": p.end_char}
            for p in doc.pages
        ],
    }


def _load_index(data_dir: Path):
    path = data_dir / _INDEX_FILE
    if not path.exists():
        raise DocRagError("no index: run `docrag ingest <file>` first")
    return index_mod.load(path)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_ingest(args, config: AppConfig) -> dict:
    doc = load_text_file(args.file, args.pages)
    registry = _load_registry(config.data_dir)

    stored = registry.get("chunking") or {}
    defaults = ChunkingConfig()
    chunking = ChunkingConfig(
        chunk_size=args.chunk_size if args.chunk_size is not None
        else stored.get("chunk_size", defaults.chunk_size),
        overlap=args.overlap if args.overlap is not None
        else stored.get("overlap", defaults.overlap),
    )

    docs = [_doc_from_entry(e) for e in registry["documents"]] + [doc]
    chunks = []
    for d in docs:
        chunks.extend(split(d, chunking))
    own = [c for c in chunks if c.doc_id == doc.doc_id]

    bi = make_bi_encoder(config.embed_backend)
    if chunks:
        idx = index_mod.build_index(chunks, bi)
        config.data_dir.mkdir(parents=True, exist_ok=True)
        index_mod.persist(idx, config.data_dir / _INDEX_FILE)

    registry["documents"].append(_doc_to_entry(doc))
    registry["chunking"] = {"chunk_size": chunking.chunk_size, "overlap": chunking.overlap}
    _save_registry(config.data_dir, registry)
    return {
        "doc_id": doc.doc_id,
        "name": doc.name,
        "chunk_count": len(own),
        "total_chunks": len(chunks),
        "documents": len(registry["documents"]),
    }


def _cmd_query(args, config: AppConfig) -> dict:
    idx = _load_index(config.data_dir)
    bi = make_bi_encoder(config.embed_backend)
    cross = make_cross_encoder(config.rerank_backend)
    retrieval = RetrievalConfig(k=args.k, m=args.m)
    contexts, timings = retrieve(idx, args.question, retrieval, bi, cross)

    answer = None
    llm_latency = None
    if config.llm is not None:
        prompt = qa_prompt(args.question, contexts)
        result = complete(config.llm, prompt)
        answer = result.text
        llm_latency = result.latency

    return {
        "question": args.question,
        "answer": answer,
        "contexts": [
            {
                "chunk_id": c.chunk_id,
                "doc_id": c.doc_id,
                "page": c.page,
                "text": c.text,
                "bi": c.bi,
                "cross": c.cross,
                "rank": c.rank,
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


def _cmd_feedback(args, config: AppConfig) -> dict:
    idx = _load_index(config.data_dir)
    bi = make_bi_encoder(config.embed_backend)
    cross = make_cross_encoder(config.rerank_backend)
    model = ModelInstanceText(content=Path(args.model).read_text(encoding="utf-8"))
    raw_rules = json.loads(Path(args.rules).read_text(encoding="utf-8"))
    rules = [RuleResult(r["rule_id"], r["rule_text"], r["status"]) for r in raw_rules]

    def retriever(query: str):
        contexts, _ = retrieve(idx, query, config.retrieval, bi, cross)
        return contexts

    plan = feedback_workflow(model, rules, args.scenario, retriever)
    out = {
        "phase": plan.phase,
        "prompts": [
            {"kind": p.kind, "text": p.text, "context_refs": list(p.context_refs)}
            for p in plan.prompts
        ],
    }
    if args.execute:
        if config.llm is None:
            raise DocRagError("no chat model configured (set RAG_LLM_BASE_URL)")
        answers = [complete(config.llm, p) for p in plan.prompts]
        out["answers"] = [{"text": a.text, "latency": a.latency} for a in answers]
    return out


def _cmd_eval_run(args, config: AppConfig) -> dict:
    if config.llm is None:
        raise DocRagError("no chat model configured (set RAG_LLM_BASE_URL)")
    idx = _load_index(config.data_dir)
    bi = make_bi_encoder(config.embed_backend)
    cross = make_cross_encoder(config.rerank_backend)
    manual = evalbench.load_grades_file(args.grades) if args.grades else None
    models = args.models.split(",") if args.models else [config.llm.model_name]
    configs = [
        evalbench.LlmConfig(
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
        configs, idx, bi, cross, manual_grades=manual,
        heuristic=args.heuristic, retrieval=config.retrieval,
    )
    return evalbench.report_json(report)


def _cmd_eval_report(args, config: AppConfig) -> dict:
    grades = evalbench.load_grades_file(args.grades)
    _, reference_times = evalbench.load_reference_grades()
    report = evalbench.report_from_grades(grades, exec_times=reference_times)
    return evalbench.report_json(report)


def _cmd_bench(args, config: AppConfig) -> dict:
    pages = [int(p) for p in args.pages.split(",")]
    records = evalbench.bench_scalability(page_counts=pages, search_runs=args.search_runs)
    csv_text = evalbench.bench_csv(records)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    return {"records": evalbench.bench_records_json(records),
            "csv": str(args.out) if args.out else None}


def _cmd_serve(args, config: AppConfig) -> dict:
    from .service import serve

    serve(config, host=args.host, port=args.port)
    return {}


# ---------------------------------------------------------------------------
# Argument parsing and rendering
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docrag",
        description="document-grounded retrieval-augmented QA engine",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit machine-readable JSON")
    common.add_argument("--data-dir", type=Path, default=None, help="state directory")
    common.add_argument("--config", type=Path, default=None, help="JSON config file")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="chunk, embed, and index a text file")
    p.add_argument("file", type=Path)
    p.add_argument("--pages", type=Path, default=None, help="page-marker sidecar JSON")
    p.add_argument("--chunk-size", type=int, default=None)
    p.add_argument("--overlap", type=int, default=None)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("query", parents=[common], help="two-stage retrieval + grounded answer")
    p.add_argument("question")
    p.add_argument("--k", type=int, default=32, help="stage-1 shortlist size")
    p.add_argument("--m", type=int, default=3, help="context chunks returned")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("feedback", parents=[common], help="design-copilot feedback prompts")
    p.add_argument("--model", type=Path, required=True, help="model-instance text file")
    p.add_argument("--rules", type=Path, required=True, help="rule results JSON")
    p.add_argument("--scenario", required=True)
    p.add_argument("--execute", action="store_true", help="send prompts to the chat model")
    p.set_defaults(func=_cmd_feedback)

    p = sub.add_parser("eval", parents=[common], help="evaluation harness")
    eval_sub = p.add_subparsers(dest="eval_command", required=True)
    run = eval_sub.add_parser("run", parents=[common], help="ask the question set via RAG")
    run.add_argument("--models", default=None, help="comma-separated model names")
    run.add_argument("--grades", type=Path, default=None, help="manual grades JSON")
    run.add_argument("--heuristic", action="store_true", help="suggest grades automatically")
    run.set_defaults(func=_cmd_eval_run)
    rep = eval_sub.add_parser("report", parents=[common], help="aggregate a grades file")
    rep.add_argument("--grades", type=Path, required=True)
    rep.set_defaults(func=_cmd_eval_report)

    p = sub.add_parser("bench", parents=[common], help="indexing/search scalability bench")
    p.add_argument("--pages", default="901,3031,5162,7293", help="comma-separated page counts")
    p.add_argument("--out", type=Path, default=None, help="CSV output path")
    p.add_argument("--search-runs", type=int, default=3)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=_cmd_serve)

    return parser


def _render(command: str, result: dict) -> str:
    if command == "ingest":
        return (
            f"indexed {result['name']} as {result['doc_id']}: {result['chunk_count']} chunks "
            f"({result['total_chunks']} total across {result['documents']} document(s))"
        )
    if command == "query":
        lines = []
        if result["answer"] is not None:
            lines.append(result["answer"])
        else:
            lines.append("(no chat model configured; showing retrieved context only)")
        lines.append("")
        for c in result["contexts"]:
            page = f" p.{c['page']}" if c["page"] is not None else ""
            lines.append(
                f"[{c['rank']}] {c['doc_id']}{page} (bi={c['bi']:.3f}, cross={c['cross']:.3f})"
            )
            text = c["text"]
            lines.append("    " + (text[:240] + "…" if len(text) > 240 else text))
        t = result["timings"]
        llm_part = f", llm {t['llm'] * 1e3:.0f} ms" if t["llm"] is not None else ""
        lines.append(f"search {t['total_search'] * 1e3:.1f} ms{llm_part}")
        return "\n".join(lines)
    if command == "feedback":
        lines = [f"phase: {result['phase']}"]
        for i, p in enumerate(result["prompts"]):
            lines.append(f"--- prompt {i + 1} ({p['kind']}) ---")
            lines.append(p["text"])
        for i, a in enumerate(result.get("answers", [])):
            lines.append(f"--- answer {i + 1} ---")
            lines.append(a["text"])
        return "\n".join(lines)
    if command == "bench":
        records = [
            evalbench.BenchRecord(
                pages=r["pages"],
                indexing_time=r["indexing_time"],
                search_time=r["search_time"],
                embed_calls=r["embed_calls"],
                chunk_count=r["chunk_count"],
                bi_calls_per_query=r["bi_calls_per_query"],
                cross_calls_per_query=r["cross_calls_per_query"],
            )
            for r in result["records"]
        ]
        table = evalbench.bench_table(records)
        if result.get("csv"):
            table += f"\nwrote {result['csv']}"
        return table
    if command == "eval":
        rows = result.get("rows", [])
        report = evalbench.EvalReport(
            questions=tuple(
                evalbench.QAItem(q["question_id"], q["question"], "") for q in result["questions"]
            ),
            rows=tuple(
                evalbench.EvalRow(
                    model_name=r["model_name"],
                    scores=r["scores"],
                    overall_score=r["overall_score"],
                    grading=r["grading"],
                    mean_exec_time=r["mean_exec_time"],
                )
                for r in rows
            ),
        )
        return evalbench.report_table(report)
    return json.dumps(result, indent=2)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config) if args.config else load_config()
        if args.data_dir is not None:
            config.data_dir = args.data_dir
        if getattr(args, "port", None) is not None and args.command == "serve":
            config.port = args.port
        result = args.func(args, config)
    except (DocRagError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"docrag: error: {exc}", file=sys.stderr)
        return 1

    if args.command == "serve":
        return 0
    if args.json:
        print(json.dumps(result, indent=2))
    else:
        print(_render(args.command, result))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
