"""Application configuration: JSON config file with environment overrides.

Reference backends are the default everywhere so the whole stack works
offline; remote model servers are opted into via the config file or the
``RAG_*`` environment variables.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .encoders import BackendConfig
from .ingest import ChunkingConfig
from .llm import LlmConfig
from .pipeline import RetrievalConfig

DEFAULT_PORT = 8080

ENV_EMBED_BASE_URL = "RAG_EMBED_BASE_URL"
ENV_RERANK_BASE_URL = "RAG_RERANK_BASE_URL"
ENV_EMBED_API_KEY = "RAG_EMBED_API_KEY"
ENV_LLM_BASE_URL = "RAG_LLM_BASE_URL"
ENV_LLM_API_KEY = "RAG_LLM_API_KEY"
ENV_LLM_MODEL = "RAG_LLM_MODEL"


def default_data_dir() -> Path:
    cache_home = os.environ.get("XDG_CACHE_HOME") or os.path.join("~", ".cache")
    return Path(cache_home).expanduser() / "docrag"


@dataclass
class AppConfig:
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    embed_backend: BackendConfig = field(default_factory=BackendConfig)
    rerank_backend: BackendConfig = field(default_factory=BackendConfig)
    llm: LlmConfig | None = None
    data_dir: Path = field(default_factory=default_data_dir)
    port: int = DEFAULT_PORT
    api_key: str | None = None  # static service key; unset means open


def _backend_from_dict(d: dict, api_key: str | None) -> BackendConfig:
    return BackendConfig(
        kind=d.get("kind", "remote" if d.get("base_url") else "reference"),
        base_url=d.get("base_url"),
        model_name=d.get("model_name", ""),
        timeout=float(d.get("timeout", 30.0)),
        retry_count=int(d.get("retry_count", 2)),
        api_key=d.get("api_key", api_key),
    )


def load_config(path: str | Path | None = None, env=None) -> AppConfig:
    """Build an AppConfig from an optional JSON file plus environment overrides."""
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))

    chunking = ChunkingConfig(**raw.get("chunking", {}))
    retrieval = RetrievalConfig(**raw.get("retrieval", {}))

    embed_key = env.get(ENV_EMBED_API_KEY)
    embed_raw = dict(raw.get("embed", {}))
    if env.get(ENV_EMBED_BASE_URL):
        embed_raw["base_url"] = env[ENV_EMBED_BASE_URL]
        embed_raw["kind"] = "remote"
    embed_backend = _backend_from_dict(embed_raw, embed_key)

    rerank_raw = dict(raw.get("rerank", {}))
    if env.get(ENV_RERANK_BASE_URL):
        rerank_raw["base_url"] = env[ENV_RERANK_BASE_URL]
        rerank_raw["kind"] = "remote"
    rerank_backend = _backend_from_dict(rerank_raw, None)

    llm_raw = dict(raw.get("llm", {}))
    if env.get(ENV_LLM_BASE_URL):
        llm_raw["base_url"] = env[ENV_LLM_BASE_URL]
    if env.get(ENV_LLM_MODEL):
        llm_raw["model_name"] = env[ENV_LLM_MODEL]
    if env.get(ENV_LLM_API_KEY):
        llm_raw["api_key"] = env[ENV_LLM_API_KEY]
    llm = LlmConfig(**llm_raw) if llm_raw.get("base_url") else None

    return AppConfig(
        chunking=chunking,
        retrieval=retrieval,
        embed_backend=embed_backend,
        rerank_backend=rerank_backend,
        llm=llm,
        data_dir=Path(raw["data_dir"]) if raw.get("data_dir") else default_data_dir(),
        port=int(raw.get("port", DEFAULT_PORT)),
        api_key=raw.get("api_key"),
    )
