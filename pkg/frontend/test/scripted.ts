// A scripted service instance: a fetch-compatible function that speaks the
// documented API from canned state, so UI flows are verified without a
// running backend.

export interface ScriptedState {
  chunkCount: number | null; // null = nothing ingested yet
  failUploads: boolean;
  llmConfigured: boolean;
  requests: Array<{ method: string; path: string; body: unknown }>;
}

const CONTEXTS = [
  {
    chunk_id: "doc1#4", doc_id: "doc1", page: 3,
    text: "calibration data is applied as software parameter values after the build",
    bi: 0.91, cross: 0.41, rank: 0, generation: 1,
  },
  {
    chunk_id: "doc1#7", doc_id: "doc1", page: 5,
    text: "configuration data only selects code variants",
    bi: 0.87, cross: 0.28, rank: 1, generation: 1,
  },
  {
    chunk_id: "doc1#1", doc_id: "doc1", page: null,
    text: "scope and purpose of the handbook",
    bi: 0.80, cross: 0.12, rank: 2, generation: 1,
  },
];

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export function scriptedService(state: ScriptedState) {
  return async (input: string, init?: RequestInit): Promise<Response> => {
    const path = input.replace(/^https?:\/\/[^/]+/, "");
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    state.requests.push({ method, path, body });

    if (method === "POST" && path === "/v1/documents") {
      if (state.failUploads) {
        return jsonResponse(502, {
          code: "backend-failure", message: "embedding server unreachable", detail: null,
        });
      }
      const words = String(body.text).split(/\s+/).filter(Boolean).length;
      state.chunkCount = Math.max(1, Math.ceil(words / 10));
      return jsonResponse(200, { doc_id: "doc1", chunk_count: state.chunkCount });
    }

    if (method === "POST" && path === "/v1/query") {
      if (state.chunkCount === null) {
        return jsonResponse(409, {
          code: "no-index", message: "no document ingested yet; upload one first", detail: null,
        });
      }
      const m = body.m ?? 3;
      return jsonResponse(200, {
        answer: state.llmConfigured
          ? `Grounded answer to: ${body.question}`
          : null,
        generation: 1,
        contexts: CONTEXTS.slice(0, m),
        timings: {
          encode_query: 0.0001, stage1_scan: 0.0004, stage2_rerank: 0.0011,
          total_search: 0.0016, llm: state.llmConfigured ? 0.2 : null,
        },
      });
    }

    if (method === "POST" && path === "/v1/feedback") {
      if (!Array.isArray(body.rules) || body.rules.length === 0) {
        return jsonResponse(400, { code: "invalid-body", message: "rules must be non-empty" });
      }
      const failing = body.rules.filter((r: { status: string }) => r.status === "fail");
      const prompts = failing.length
        ? failing.map((r: { rule_text: string }) => ({
            kind: "improvement",
            text: `What to do to improve ${body.model_instance} if rule is not satisfied ${r.rule_text} based on [(1)] [doc1 p.3] guidance?`,
            context_refs: ["doc1#4"],
          }))
        : [{
            kind: "completeness",
            text: `Are ${body.scenario} requirements complete for ${body.model_instance} based on [(1)] [doc1 p.3] guidance as reference?`,
            context_refs: ["doc1#4"],
          }];
      const response: Record<string, unknown> = {
        phase: failing.length ? "improvement" : "completeness",
        prompts,
      };
      if (body.execute) {
        response.answers = prompts.map((p: { text: string }, i: number) => ({
          text: `Suggestion ${i + 1} for: ${p.text.slice(0, 40)}…`,
          latency: 0.05,
        }));
      }
      return jsonResponse(200, response);
    }

    if (method === "GET" && path === "/v1/status") {
      return jsonResponse(200, {
        documents: state.chunkCount === null ? 0 : 1,
        chunks: state.chunkCount ?? 0,
        generation: state.chunkCount === null ? null : 1,
        llm_configured: state.llmConfigured,
      });
    }

    return jsonResponse(404, { code: "not-found", message: `no route ${method} ${path}` });
  };
}

export function freshState(overrides: Partial<ScriptedState> = {}): ScriptedState {
  return {
    chunkCount: null,
    failUploads: false,
    llmConfigured: true,
    requests: [],
    ...overrides,
  };
}
