"""Chat-completion client (OpenAI-compatible wire format).

Request bodies are canonical JSON (sorted keys, no whitespace) so that a
fixed (config, prompt) pair always produces byte-identical requests.
Latency is measured with a monotonic clock around the full exchange.
Generation is not idempotent, so requests are never retried once any byte
may have reached the server; only connection-establishment failures are
retried.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import requests

from .errors import BackendProtocolError, BackendTransportError, LlmBatchError, LlmTimeoutError
from .prompts import PromptInstance

_CONNECT_RETRIES = 2
_BACKOFF_START = 0.25


@dataclass(frozen=True)
class LlmConfig:
    base_url: str
    model_name: str = "gpt-4o"
    temperature: float = 0.0
    timeout: float = 120.0
    max_tokens: int = 1024
    api_key: str | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class LlmAnswer:
    text: str
    latency: float
    model_name: str
    prompt_ref: str


def request_body(config: LlmConfig, prompt: PromptInstance) -> bytes:
    """Canonical chat-completion request body for (config, prompt)."""
    payload = {
        "max_tokens": config.max_tokens,
        "messages": [{"content": prompt.text, "role": "user"}],
        "model": config.model_name,
        "temperature": config.temperature,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def complete(config: LlmConfig, prompt: PromptInstance) -> LlmAnswer:
    """Send one prompt and return the answer with its measured latency."""
    if not prompt.text:
        raise ValueError("prompt text must be non-empty")
    url = config.base_url.rstrip("/") + "/v1/chat/completions"
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    body = request_body(config, prompt)

    delay = _BACKOFF_START
    attempt = 0
    t_start = time.perf_counter()
    while True:
        attempt += 1
        try:
            resp = requests.post(url, data=body, headers=headers, timeout=config.timeout)
            break
        except requests.exceptions.ReadTimeout as exc:
            raise LlmTimeoutError(f"{url}: no response within {config.timeout}s", attempts=attempt) from exc
        except requests.ConnectionError as exc:
            # Connection never established; safe to retry without double generation.
            if attempt > _CONNECT_RETRIES:
                raise BackendTransportError(f"{url}: {exc}", attempts=attempt) from exc
            time.sleep(delay)
            delay *= 2
    latency = time.perf_counter() - t_start

    if resp.status_code != 200:
        raise BackendProtocolError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
    try:
        data = resp.json()
        text = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise BackendProtocolError(f"{url}: malformed chat-completion response") from exc
    if not isinstance(text, str):
        raise BackendProtocolError(f"{url}: answer content is not a string")
    return LlmAnswer(
        text=text, latency=latency, model_name=config.model_name, prompt_ref=prompt.prompt_id
    )


def complete_batch(config: LlmConfig, prompts: list[PromptInstance]) -> list[LlmAnswer]:
    """Complete prompts sequentially (latency comparability), preserving order.

    Fails fast: the first error aborts the batch and carries the answers
    obtained so far.
    """
    answers: list[LlmAnswer] = []
    for prompt in prompts:
        try:
            answers.append(complete(config, prompt))
        except Exception as exc:
            raise LlmBatchError(
                f"batch failed at prompt {len(answers)} of {len(prompts)}: {exc}", partial=answers
            ) from exc
    return answers
