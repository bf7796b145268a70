"""Bi-encoder and cross-encoder backends.

Two families share one interface:

* remote backends speak HTTP JSON to a model server (OpenAI-style
  ``POST /v1/embeddings`` for the bi-encoder, ``POST /v1/rerank`` for the
  cross-encoder);
* reference backends are deterministic, dependency-free stand-ins used for
  offline tests and benchmarks. The reference bi-encoder is a seeded hashed
  bag-of-words into 384 dimensions; the reference cross-encoder is
  token-overlap F1.

All embeddings are 384-dimensional unit-norm float64 vectors. Backends keep
an instrumentation counter of how many texts (or pairs) they scored, which
the benchmark harness uses for its work-count checks.
"""

from __future__ import annotations

import hashlib
import threading
import time
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import requests

from .errors import BackendProtocolError, BackendTransportError, ConfigurationError

EMBED_DIM = 384
UNIT_NORM_TOL = 1e-6

REFERENCE_EMBEDDER_ID = "reference/hashed-bow-384/v1"

# Defaults the remote backends are pointed at when no model is configured.
DEFAULT_BI_MODEL = "multi-qa-MiniLM-L6-cos-v1"
DEFAULT_CROSS_MODEL = "cross-encoder/ms-marco-MiniLM-L-6-v2"

_HASH_KEY = b"docrag-ref-embed-v1"  # seed constant; changing it changes REFERENCE_EMBEDDER_ID


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "reference"  # "reference" | "remote"
    base_url: str | None = None
    model_name: str = ""
    timeout: float = 30.0
    retry_count: int = 2
    api_key: str | None = None

    def __post_init__(self):
        if self.kind not in ("reference", "remote"):
            raise ConfigurationError(f"unknown backend kind {self.kind!r}")
        if self.kind == "remote" and not self.base_url:
            raise ConfigurationError("remote backend requires base_url")


@lru_cache(maxsize=65536)
def _token_coords(token: str) -> tuple[int, int, int, int]:
    """Map a token to its two signed coordinates, deterministically."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=16, key=_HASH_KEY).digest()
    i1 = int.from_bytes(digest[0:4], "big") % EMBED_DIM
    s1 = 1 if digest[4] & 1 else -1
    i2 = int.from_bytes(digest[5:9], "big") % EMBED_DIM
    s2 = 1 if digest[9] & 1 else -1
    return i1, s1, i2, s2


def reference_embed(text: str) -> np.ndarray:
    """Hashed bag-of-words embedding: 384 dims, unit norm, bit-deterministic.

    Each lowercased whitespace token adds its two signed coordinates once per
    occurrence; the sum is L2-normalized. An all-zero accumulation (notably
    the empty text) maps to the first basis vector.
    """
    vec = np.zeros(EMBED_DIM, dtype=np.float64)
    for token, count in Counter(text.lower().split()).items():
        i1, s1, i2, s2 = _token_coords(token)
        vec[i1] += s1 * count
        vec[i2] += s2 * count
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


def token_overlap_f1(query: str, passage: str) -> float:
    """F1 of the token-multiset overlap between query and passage.

    Tokens are lowercased whitespace tokens; identical multisets score 1.0,
    disjoint ones 0.0.
    """
    q = Counter(query.lower().split())
    p = Counter(passage.lower().split())
    overlap = sum(min(c, p[t]) for t, c in q.items() if t in p)
    denom = sum(q.values()) + sum(p.values())
    if denom == 0 or overlap == 0:
        return 0.0
    return 2.0 * overlap / denom


def bi_score(a: np.ndarray, b: np.ndarray) -> float:
    """Similarity in [0, 1] from the cosine of two unit vectors: (1 + cos) / 2."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    cos = float(np.dot(a, b))
    return min(1.0, max(0.0, (1.0 + cos) / 2.0))


class _CallCounter:
    """Thread-safe running total of scored items."""

    def __init__(self):
        self._n = 0
        self._lock = threading.Lock()

    def add(self, k: int):
        with self._lock:
            self._n += k

    @property
    def value(self) -> int:
        return self._n


class ReferenceBiEncoder:
    """Deterministic offline bi-encoder. Stateless apart from its counter."""

    embedder_id = REFERENCE_EMBEDDER_ID

    def __init__(self):
        self._counter = _CallCounter()

    @property
    def calls(self) -> int:
        return self._counter.value

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        self._counter.add(len(texts))
        return [reference_embed(t) for t in texts]


class ReferenceCrossEncoder:
    """Deterministic offline cross-encoder (token-overlap F1)."""

    def __init__(self):
        self._counter = _CallCounter()

    @property
    def calls(self) -> int:
        return self._counter.value

    def score(self, query: str, passage: str) -> float:
        self._counter.add(1)
        return token_overlap_f1(query, passage)

    def score_batch(self, query: str, passages: list[str]) -> list[float]:
        self._counter.add(len(passages))
        return [token_overlap_f1(query, p) for p in passages]


def _post_with_retry(session, url, payload, config: BackendConfig) -> dict:
    """POST JSON with bounded exponential-backoff retries on transport failures."""
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    delay = 0.25
    attempt = 0
    while True:
        attempt += 1
        try:
            resp = session.post(url, json=payload, headers=headers, timeout=config.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            if attempt > config.retry_count:
                raise BackendTransportError(f"{url}: {exc}", attempts=attempt) from exc
            time.sleep(delay)
            delay *= 2
            continue
        if resp.status_code != 200:
            raise BackendProtocolError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendProtocolError(f"{url}: response is not JSON") from exc


class RemoteBiEncoder:
    """Client for an OpenAI-compatible embeddings endpoint."""

    def __init__(self, config: BackendConfig):
        if config.kind != "remote":
            raise ConfigurationError("RemoteBiEncoder requires a remote BackendConfig")
        self.config = config
        self.embedder_id = f"remote/{config.model_name or DEFAULT_BI_MODEL}"
        self._session = requests.Session()
        self._lock = threading.Lock()
        self._counter = _CallCounter()

    @property
    def calls(self) -> int:
        return self._counter.value

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        url = self.config.base_url.rstrip("/") + "/v1/embeddings"
        payload = {"model": self.config.model_name or DEFAULT_BI_MODEL, "input": list(texts)}
        with self._lock:
            body = _post_with_retry(self._session, url, payload, self.config)
        data = body.get("data")
        if not isinstance(data, list) or len(data) != len(texts):
            raise BackendProtocolError(
                f"embeddings response has {len(data) if isinstance(data, list) else 'no'} "
                f"items for {len(texts)} inputs"
            )
        out: list[np.ndarray] = [None] * len(texts)  # type: ignore[list-item]
        for item in data:
            idx = item.get("index")
            emb = item.get("embedding")
            if not isinstance(idx, int) or not 0 <= idx < len(texts) or out[idx] is not None:
                raise BackendProtocolError("embeddings response has bad or duplicate index")
            vec = np.asarray(emb, dtype=np.float64)
            if vec.shape != (EMBED_DIM,):
                raise BackendProtocolError(
                    f"server returned dimension {vec.shape}, expected ({EMBED_DIM},)"
                )
            if not np.all(np.isfinite(vec)):
                raise BackendProtocolError("server returned non-finite embedding values")
            norm = np.linalg.norm(vec)
            if norm == 0.0:
                vec = np.zeros(EMBED_DIM, dtype=np.float64)
                vec[0] = 1.0
            else:
                vec = vec / norm
            out[idx] = vec
        self._counter.add(len(texts))
        return out


class RemoteCrossEncoder:
    """Client for a ``POST /v1/rerank`` {query, documents[]} -> {scores[]} endpoint."""

    def __init__(self, config: BackendConfig):
        if config.kind != "remote":
            raise ConfigurationError("RemoteCrossEncoder requires a remote BackendConfig")
        self.config = config
        self._session = requests.Session()
        self._lock = threading.Lock()
        self._counter = _CallCounter()

    @property
    def calls(self) -> int:
        return self._counter.value

    def score(self, query: str, passage: str) -> float:
        return self.score_batch(query, [passage])[0]

    def score_batch(self, query: str, passages: list[str]) -> list[float]:
        url = self.config.base_url.rstrip("/") + "/v1/rerank"
        payload = {
            "model": self.config.model_name or DEFAULT_CROSS_MODEL,
            "query": query,
            "documents": list(passages),
        }
        with self._lock:
            body = _post_with_retry(self._session, url, payload, self.config)
        scores = body.get("scores")
        if not isinstance(scores, list) or len(scores) != len(passages):
            raise BackendProtocolError(
                f"rerank response has {len(scores) if isinstance(scores, list) else 'no'} "
                f"scores for {len(passages)} documents"
            )
        values = [float(s) for s in scores]
        if not all(np.isfinite(v) for v in values):
            raise BackendProtocolError("rerank response contains non-finite scores")
        self._counter.add(len(passages))
        return values


def make_bi_encoder(config: BackendConfig):
    return ReferenceBiEncoder() if config.kind == "reference" else RemoteBiEncoder(config)


def make_cross_encoder(config: BackendConfig):
    return ReferenceCrossEncoder() if config.kind == "reference" else RemoteCrossEncoder(config)
