"""Document-grounded retrieval-augmented QA with two-stage retrieve-and-rerank."""

from .encoders import (
    BackendConfig,
    ReferenceBiEncoder,
    ReferenceCrossEncoder,
    bi_score,
    make_bi_encoder,
    make_cross_encoder,
    reference_embed,
    token_overlap_f1,
)
from .errors import DocRagError
from .index import VectorIndex, build_index, load, persist, top_k
from .ingest import (
    ChunkingConfig,
    ChunkRecord,
    Document,
    PageMarker,
    load_document,
    load_text_file,
    split,
    synth_corpus,
)
from .llm import LlmAnswer, LlmConfig, complete, complete_batch
from .pipeline import ContextChunk, RetrievalConfig, StageTimings, retrieve, retrieve_stage1_only
from .prompts import (
    FeedbackPlan,
    ModelInstanceText,
    PromptInstance,
    RuleResult,
    completeness_prompt,
    feedback_workflow,
    improvement_prompt,
    qa_prompt,
)

__version__ = "0.1.0"
