// Typed client for the docrag HTTP API. The UI never talks to anything else.

export interface PageMarker {
  page: number;
  start_char: number;
  end_char: number;
}

export interface UploadResponse {
  doc_id: string;
  chunk_count: number;
}

export interface ContextCard {
  chunk_id: string;
  doc_id: string;
  page: number | null;
  text: string;
  bi: number;
  cross: number;
  rank: number;
  generation?: number;
}

export interface QueryTimings {
  encode_query: number;
  stage1_scan: number;
  stage2_rerank: number;
  total_search: number;
  llm: number | null;
}

export interface QueryResponse {
  answer: string | null;
  generation: number;
  contexts: ContextCard[];
  timings: QueryTimings;
}

export interface RuleResult {
  rule_id: string;
  rule_text: string;
  status: "pass" | "fail";
}

export interface FeedbackPrompt {
  kind: string;
  text: string;
  context_refs: string[];
}

export interface FeedbackAnswer {
  text: string;
  latency: number;
  prompt_ref?: string;
}

export interface FeedbackResponse {
  phase: "improvement" | "completeness";
  prompts: FeedbackPrompt[];
  answers?: FeedbackAnswer[];
}

export interface StatusResponse {
  documents: number;
  chunks: number;
  generation: number | null;
  llm_configured: boolean;
}

export interface Problem {
  code: string;
  message: string;
  detail?: string | null;
}

export class ApiError extends Error {
  constructor(public status: number, public problem: Problem) {
    super(problem.message || `HTTP ${status}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class RagClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = null;
    }
    if (!response.ok) {
      const problem = (parsed ?? { code: "unknown", message: text }) as Problem;
      throw new ApiError(response.status, problem);
    }
    return parsed as T;
  }

  uploadDocument(name: string, text: string, pageMarkers?: PageMarker[]): Promise<UploadResponse> {
    return this.request<UploadResponse>("POST", "/v1/documents", {
      name,
      text,
      page_markers: pageMarkers ?? null,
    });
  }

  query(question: string, m?: number, k?: number): Promise<QueryResponse> {
    return this.request<QueryResponse>("POST", "/v1/query", {
      question,
      k: k ?? null,
      m: m ?? null,
    });
  }

  feedback(
    modelInstance: string,
    rules: RuleResult[],
    scenario: string,
    execute: boolean,
  ): Promise<FeedbackResponse> {
    return this.request<FeedbackResponse>("POST", "/v1/feedback", {
      model_instance: modelInstance,
      rules,
      scenario,
      execute,
    });
  }

  status(): Promise<StatusResponse> {
    return this.request<StatusResponse>("GET", "/v1/status");
  }
}
