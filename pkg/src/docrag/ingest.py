"""Document loading, overlapping chunking, and synthetic corpus generation.

Everything here is pure: the same inputs always produce the same outputs,
and nothing mutates its arguments. Chunking operates on whitespace tokens
so that character provenance (``char_range``) can always be mapped back to
the source text by slicing.
"""

from __future__ import annotations

import json
import random
import re
import uuid
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

from .errors import PageMarkerError

_TOKEN_RE = re.compile(r"\S+")

DEFAULT_CHUNK_SIZE = 300
DEFAULT_OVERLAP = 50
DEFAULT_WORDS_PER_PAGE = 500


@dataclass(frozen=True)
class PageMarker:
    """Half-open character range [start_char, end_char) belonging to one page."""

    page: int
    start_char: int
    end_char: int


@dataclass(frozen=True)
class Document:
    doc_id: str
    name: str
    text: str
    pages: tuple[PageMarker, ...] = ()

    def page_of(self, char_index: int) -> int | None:
        """Page number containing ``char_index``, or None when unpaginated."""
        if not self.pages:
            return None
        starts = [m.start_char for m in self.pages]
        i = bisect_right(starts, char_index) - 1
        if i >= 0 and self.pages[i].start_char <= char_index < self.pages[i].end_char:
            return self.pages[i].page
        return None


@dataclass(frozen=True)
class ChunkRecord:
    """A contiguous span of a source document plus its provenance.

    ``token_range`` and ``char_range`` are half-open intervals; ``text`` is
    always exactly ``document.text[char_range[0]:char_range[1]]``.
    """

    chunk_id: str
    doc_id: str
    seq: int
    text: str
    token_range: tuple[int, int]
    char_range: tuple[int, int]
    page: int | None = None


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size: int = DEFAULT_CHUNK_SIZE
    overlap: int = DEFAULT_OVERLAP

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be positive, got {self.chunk_size}")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError(
                f"overlap must satisfy 0 <= overlap < chunk_size, "
                f"got overlap={self.overlap}, chunk_size={self.chunk_size}"
            )

    @property
    def step(self) -> int:
        return self.chunk_size - self.overlap


def _validate_markers(markers, text_len: int) -> tuple[PageMarker, ...]:
    prev_end = 0
    out = []
    for m in markers:
        triple = (m.page, m.start_char, m.end_char)
        if m.start_char > m.end_char:
            raise PageMarkerError(f"page {m.page}: start_char > end_char", triple)
        if m.start_char < prev_end:
            raise PageMarkerError(
                f"page {m.page}: range [{m.start_char}, {m.end_char}) overlaps or is out of order",
                triple,
            )
        if m.end_char > text_len:
            raise PageMarkerError(
                f"page {m.page}: range [{m.start_char}, {m.end_char}) exceeds text length {text_len}",
                triple,
            )
        prev_end = m.end_char
        out.append(m)
    return tuple(out)


def load_document(name: str, raw_text: str, page_markers=None) -> Document:
    """Wrap raw text as a Document with a fresh id and validated page markers.

    Page markers, when given, must be ordered, non-overlapping, and contained
    in ``[0, len(raw_text))``; offending markers are rejected with the range
    that failed. Markers need not cover every character (front matter may be
    unpaginated).
    """
    markers = _validate_markers(page_markers or (), len(raw_text))
    return Document(doc_id=uuid.uuid4().hex[:12], name=name, text=raw_text, pages=markers)


def load_text_file(path: str | Path, markers_path: str | Path | None = None) -> Document:
    """Read a UTF-8 text/Markdown file, optionally with a page-marker sidecar.

    The sidecar is a JSON list of ``{"page": int, "start_char": int,
    "end_char": int}`` objects.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    markers = None
    if markers_path is not None:
        raw = json.loads(Path(markers_path).read_text(encoding="utf-8"))
        markers = [PageMarker(m["page"], m["start_char"], m["end_char"]) for m in raw]
    return load_document(path.stem, text, markers)


def tokenize_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of the whitespace tokens of ``text``, in order."""
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def split(document: Document, config: ChunkingConfig | None = None) -> list[ChunkRecord]:
    """Split a document into overlapping chunks of at most ``chunk_size`` tokens.

    Chunks start every ``chunk_size - overlap`` tokens, so consecutive chunks
    share exactly ``overlap`` tokens; the final chunk ends at the document end
    and may be shorter. An empty document yields no chunks.
    """
    config = config or ChunkingConfig()
    spans = tokenize_spans(document.text)
    n = len(spans)
    if n == 0:
        return []

    chunks: list[ChunkRecord] = []
    start = 0
    seq = 0
    while True:
        end = min(start + config.chunk_size, n)
        char_start = spans[start][0]
        char_end = spans[end - 1][1]
        chunks.append(
            ChunkRecord(
                chunk_id=f"{document.doc_id}#{seq}",
                doc_id=document.doc_id,
                seq=seq,
                text=document.text[char_start:char_end],
                token_range=(start, end),
                char_range=(char_start, char_end),
                page=document.page_of(char_start),
            )
        )
        if end >= n:
            break
        start += config.step
        seq += 1
    return chunks


# Fixed vocabulary for synthetic benchmark corpora. The words are generic
# engineering terms so that benchmark queries look like real queries.
SYNTH_VOCAB = (
    "system", "sensor", "signal", "fault", "brake", "torque", "camera",
    "vehicle", "module", "requirement", "safety", "latency", "voltage",
    "interface", "diagnostic", "monitor", "controller", "redundancy",
    "timing", "failure", "detection", "interval", "calibration", "parameter",
    "software", "hardware", "test", "validation", "architecture", "bus",
    "message", "gateway", "actuator", "threshold", "tolerance", "mode",
    "state", "power", "clock", "memory", "process", "channel", "frame",
    "update", "variant", "review", "audit", "budget",
)


def synth_corpus(pages: int, words_per_page: int = DEFAULT_WORDS_PER_PAGE, seed: int = 7) -> Document:
    """Deterministic synthetic document of ``pages`` pages.

    Each page holds exactly ``words_per_page`` tokens drawn from
    ``SYNTH_VOCAB`` by ``random.Random(seed)``; pages are newline-separated
    and carry markers that tile the whole text.
    """
    if pages < 0:
        raise ValueError("pages must be >= 0")
    if words_per_page < 1:
        raise ValueError("words_per_page must be >= 1")

    rng = random.Random(seed)
    doc_id = f"synth-p{pages}-w{words_per_page}-s{seed}"
    if pages == 0:
        return Document(doc_id=doc_id, name="synth", text="", pages=())

    page_texts = [
        " ".join(rng.choice(SYNTH_VOCAB) for _ in range(words_per_page))
        for _ in range(pages)
    ]
    text = "\n".join(page_texts)

    markers = []
    pos = 0
    for i, page_text in enumerate(page_texts):
        end = pos + len(page_text)
        if i < pages - 1:
            end += 1  # the separating newline belongs to the page it follows
        markers.append(PageMarker(page=i + 1, start_char=pos, end_char=end))
        pos = end
    return Document(doc_id=doc_id, name="synth", text=text, pages=tuple(markers))
