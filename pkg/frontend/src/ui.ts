// Pure DOM builders. No state, no fetch: everything here renders data the
// API client already fetched, so grounding is visible in every answer.

import type { ContextCard, FeedbackAnswer, FeedbackPrompt, QueryResponse, RuleResult } from "./api.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

const ms = (seconds: number): string => `${(seconds * 1000).toFixed(1)} ms`;

export function renderSourceCard(ctx: ContextCard): HTMLElement {
  const card = el("details", "source-card");
  card.dataset.chunkId = ctx.chunk_id;
  const summary = el("summary");
  const where = ctx.page === null ? ctx.doc_id : `${ctx.doc_id} p.${ctx.page}`;
  summary.append(
    el("span", "source-rank", `#${ctx.rank + 1}`),
    el("span", "source-where", where),
    el("span", "source-scores", `bi ${ctx.bi.toFixed(3)} · cross ${ctx.cross.toFixed(3)}`),
  );
  card.append(summary, el("p", "source-text", ctx.text));
  return card;
}

export function renderChatTurn(question: string, result: QueryResponse): HTMLElement {
  const turn = el("section", "chat-turn");
  turn.append(el("p", "question", question));

  const answer = el(
    "p",
    result.answer === null ? "answer answer-missing" : "answer",
    result.answer ?? "No chat model is configured; these sources are the retrieval result.",
  );
  turn.append(answer);

  const t = result.timings;
  const llmPart = t.llm === null ? "" : `, model ${ms(t.llm)}`;
  turn.append(el("p", "timings", `search ${ms(t.total_search)}${llmPart}`));

  const sources = el("details", "sources");
  sources.open = true;
  sources.append(el("summary", undefined, `Sources (${result.contexts.length})`));
  for (const ctx of result.contexts) sources.append(renderSourceCard(ctx));
  turn.append(sources);
  return turn;
}

export function renderSuggestionCard(
  prompt: FeedbackPrompt,
  index: number,
  answer?: FeedbackAnswer,
): HTMLElement {
  const card = el("article", `suggestion-card kind-${prompt.kind}`);
  const title =
    prompt.kind === "completeness"
      ? "Completeness check"
      : `Improvement suggestion ${index + 1}`;
  card.append(el("h3", undefined, title));
  const promptBlock = el("details", "prompt-text");
  promptBlock.append(el("summary", undefined, "Prompt sent"), el("pre", undefined, prompt.text));
  card.append(promptBlock);
  if (answer) {
    card.append(el("p", "suggestion-answer", answer.text));
  }
  return card;
}

export function renderFeedbackResult(
  phase: "improvement" | "completeness",
  prompts: FeedbackPrompt[],
  answers?: FeedbackAnswer[],
): HTMLElement {
  const box = el("div", `feedback-result phase-${phase}`);
  box.append(
    el(
      "p",
      "phase-line",
      phase === "improvement"
        ? `${prompts.length} failing rule(s): one suggestion per rule.`
        : "All rules pass: checking requirements completeness.",
    ),
  );
  prompts.forEach((prompt, i) => box.append(renderSuggestionCard(prompt, i, answers?.[i])));
  return box;
}

export function renderBanner(kind: "error" | "warning" | "info", message: string): HTMLElement {
  return el("p", `banner banner-${kind}`, message);
}

export type ParsedRules = { ok: true; rules: RuleResult[] } | { ok: false; error: string };

export function parseRulesJson(raw: string): ParsedRules {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch (err) {
    return { ok: false, error: `Rules must be valid JSON: ${(err as Error).message}` };
  }
  if (!Array.isArray(data) || data.length === 0) {
    return { ok: false, error: "Rules must be a non-empty JSON list." };
  }
  const rules: RuleResult[] = [];
  for (const [i, item] of data.entries()) {
    const rule = item as Partial<RuleResult>;
    if (typeof rule.rule_id !== "string" || typeof rule.rule_text !== "string") {
      return { ok: false, error: `Rule ${i}: rule_id and rule_text must be strings.` };
    }
    if (rule.status !== "pass" && rule.status !== "fail") {
      return { ok: false, error: `Rule ${i}: status must be "pass" or "fail".` };
    }
    rules.push({ rule_id: rule.rule_id, rule_text: rule.rule_text, status: rule.status });
  }
  return { ok: true, rules };
}
