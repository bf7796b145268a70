#!/usr/bin/env python3
"""End-to-end offline demo: ingest the bundled handbook, ask the question set.

Runs the whole pipeline with reference encoder backends and the bundled stub
chat server (which echoes the grounded prompt back), so it works with no
network and no keys. Prints each answer's source chunks with scores.
"""

import sys
import textwrap
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from docrag.encoders import ReferenceBiEncoder, ReferenceCrossEncoder  # noqa: E402
from docrag.evalbench import load_eval_questions  # noqa: E402
from docrag.index import build_index  # noqa: E402
from docrag.ingest import ChunkingConfig, load_text_file, split  # noqa: E402
from docrag.llm import LlmConfig, complete  # noqa: E402
from docrag.pipeline import RetrievalConfig, retrieve  # noqa: E402
from docrag.prompts import qa_prompt  # noqa: E402
from docrag.stubserver import StubServer  # noqa: E402

FIXTURES = Path(__file__).parent.parent / "src" / "docrag" / "fixtures"


def main() -> int:
    doc = load_text_file(FIXTURES / "demo_standard.md")
    chunks = split(doc, ChunkingConfig())
    bi = ReferenceBiEncoder()
    cross = ReferenceCrossEncoder()
    index = build_index(chunks, bi)
    print(f"indexed {doc.name!r}: {len(chunks)} chunks, {len(doc.text.split())} tokens")

    with StubServer() as server:
        llm = LlmConfig(base_url=server.base_url, model_name="offline-stub")
        for item in load_eval_questions():
            contexts, timings = retrieve(index, item.question, RetrievalConfig(), bi, cross)
            prompt = qa_prompt(item.question, contexts)
            answer = complete(llm, prompt)
            print("\n" + "=" * 72)
            print("Q:", item.question)
            print(f"   (search {timings.total_search * 1e3:.1f} ms, "
                  f"llm {answer.latency * 1e3:.1f} ms)")
            for c in contexts:
                preview = textwrap.shorten(c.text, width=90)
                print(f"   [{c.rank}] {c.chunk_id} bi={c.bi:.3f} cross={c.cross:.3f} {preview}")
            print("   gold:", item.gold_answer)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
