"""Prompt construction for the chatbot and the design-copilot feedback loop.

Three prompt kinds exist:

* ``qa`` — question answering over retrieved context (the chatbot path);
* ``improvement`` — what to change in a design model when a rule fails;
* ``completeness`` — whether a passing model covers a scenario's requirements.

All prompts are grounded: building one without retrieved context raises
``GroundingError`` instead of silently letting the model answer from its own
knowledge.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import GroundingError

QA_TEMPLATE_VERSION = "qa/v1"
IMPROVEMENT_TEMPLATE_VERSION = "improvement/v1"
COMPLETENESS_TEMPLATE_VERSION = "completeness/v1"

_QA_HEADER = (
    "Answer the question using only the numbered context passages below. "
    "Cite the bracketed source tags you rely on. If the passages do not "
    "contain the answer, say that the reference document does not cover it."
)


@dataclass(frozen=True)
class PromptInstance:
    kind: str  # "qa" | "improvement" | "completeness"
    text: str
    context_refs: tuple[str, ...]
    template_version: str

    @property
    def prompt_id(self) -> str:
        digest = hashlib.sha256(f"{self.kind}\n{self.text}".encode("utf-8")).hexdigest()
        return digest[:12]


@dataclass(frozen=True)
class RuleResult:
    rule_id: str
    rule_text: str
    status: str  # "pass" | "fail"

    def __post_init__(self):
        if self.status not in ("pass", "fail"):
            raise ValueError(f"rule status must be 'pass' or 'fail', got {self.status!r}")


@dataclass(frozen=True)
class ModelInstanceText:
    content: str
    format_hint: str = ""


@dataclass(frozen=True)
class FeedbackPlan:
    prompts: tuple[PromptInstance, ...]
    phase: str  # "improvement" | "completeness"


def render_context_blocks(contexts: Sequence) -> str:
    """Render retrieved chunks as numbered, provenance-tagged blocks.

    Each block reads ``[(n)] [doc_id p.X] <text>``; blocks are separated by
    blank lines. Requires at least one chunk and unique chunk ids.
    """
    if not contexts:
        raise GroundingError(
            "no retrieved context: ingest a reference document before building prompts"
        )
    ids = [c.chunk_id for c in contexts]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate context chunks: {ids}")
    blocks = []
    for n, c in enumerate(contexts, start=1):
        tag = f"[{c.doc_id} p.{c.page}]" if c.page is not None else f"[{c.doc_id}]"
        blocks.append(f"[({n})] {tag} {c.text}")
    return "\n\n".join(blocks)


def _refs(contexts: Sequence) -> tuple[str, ...]:
    return tuple(c.chunk_id for c in contexts)


def qa_prompt(question: str, contexts: Sequence) -> PromptInstance:
    """Chatbot prompt: instruction header, context blocks, then the question."""
    blocks = render_context_blocks(contexts)
    text = f"{_QA_HEADER}\n\n{blocks}\n\nQuestion: {question}"
    return PromptInstance(
        kind="qa",
        text=text,
        context_refs=_refs(contexts),
        template_version=QA_TEMPLATE_VERSION,
    )


def improvement_prompt(
    model: ModelInstanceText, failing_rule: RuleResult, contexts: Sequence
) -> PromptInstance:
    """Design-improvement prompt for one failing rule."""
    if failing_rule.status != "fail":
        raise ValueError(
            f"improvement prompt requires a failing rule; {failing_rule.rule_id} has status "
            f"{failing_rule.status!r}"
        )
    if not model.content:
        raise ValueError("model instance text must be non-empty")
    blocks = render_context_blocks(contexts)
    text = (
        f"What to do to improve {model.content} if rule is not satisfied "
        f"{failing_rule.rule_text} based on {blocks}?"
    )
    return PromptInstance(
        kind="improvement",
        text=text,
        context_refs=_refs(contexts),
        template_version=IMPROVEMENT_TEMPLATE_VERSION,
    )


def completeness_prompt(
    scenario: str, model: ModelInstanceText, contexts: Sequence
) -> PromptInstance:
    """Requirements-completeness prompt for a model that passes all rules."""
    if not scenario:
        raise ValueError("scenario must be non-empty")
    if not model.content:
        raise ValueError("model instance text must be non-empty")
    blocks = render_context_blocks(contexts)
    text = (
        f"Are {scenario} requirements complete for {model.content} "
        f"based on {blocks} as reference?"
    )
    return PromptInstance(
        kind="completeness",
        text=text,
        context_refs=_refs(contexts),
        template_version=COMPLETENESS_TEMPLATE_VERSION,
    )


def feedback_workflow(
    model: ModelInstanceText,
    rules: Sequence[RuleResult],
    scenario: str,
    retriever: Callable[[str], Sequence],
) -> FeedbackPlan:
    """Two-step feedback: improvement prompts while rules fail, then completeness.

    While any rule fails, one improvement prompt is built per failing rule in
    input order, each grounded by a retrieval whose query is that rule's text.
    Once every rule passes, a single completeness prompt is built, retrieved
    with the scenario as the query.
    """
    rules = list(rules)
    if not rules:
        raise ValueError("at least one rule result is required")
    ids = [r.rule_id for r in rules]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate rule_ids: {ids}")

    failing = [r for r in rules if r.status == "fail"]
    if failing:
        prompts = tuple(
            improvement_prompt(model, rule, retriever(rule.rule_text)) for rule in failing
        )
        return FeedbackPlan(prompts=prompts, phase="improvement")
    prompt = completeness_prompt(scenario, model, retriever(scenario))
    return FeedbackPlan(prompts=(prompt,), phase="completeness")
