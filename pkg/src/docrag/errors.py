"""Exception types shared across the package."""

from __future__ import annotations


class DocRagError(Exception):
    """Base class for all errors raised by this package."""


class PageMarkerError(DocRagError):
    """A page marker is malformed, overlapping, or out of range."""

    def __init__(self, message: str, marker: tuple[int, int, int] | None = None):
        super().__init__(message)
        self.marker = marker  # (page, start_char, end_char) that was rejected


class BackendTransportError(DocRagError):
    """A remote backend could not be reached (connection failure or timeout)."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(f"{message} (after {attempts} attempt(s))")
        self.attempts = attempts


class BackendProtocolError(DocRagError):
    """A remote backend answered, but the response violates the wire contract."""


class LlmTimeoutError(BackendTransportError):
    """The chat-completion request timed out."""


class LlmBatchError(DocRagError):
    """A batch completion failed part-way; carries the answers obtained so far."""

    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial


class ConfigurationError(DocRagError):
    """Incompatible or incomplete configuration (e.g. embedder mismatch)."""


class GroundingError(DocRagError):
    """A prompt was requested without retrieved context to ground it."""


class IndexLoadError(DocRagError):
    """A persisted index file is missing, truncated, or incompatible."""


class EvalRunError(DocRagError):
    """An evaluation or benchmark run failed; carries partial measurements."""

    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial
