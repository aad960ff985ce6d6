"""Engine exception hierarchy."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for engine failures."""


class InvalidArgumentError(EngineError, ValueError):
    """Caller violated an operation precondition (dimension mismatch, bad scale)."""


class FormatError(EngineError, ValueError):
    """Input file or raster does not match its documented format."""


class ValidationError(EngineError, ValueError):
    """A domain value violates its invariants."""

    def __init__(self, message: str, violations: list | None = None):
        super().__init__(message)
        self.violations = violations or []


class ConflictError(EngineError):
    """State changed under the caller (stale candidate version, missing precondition)."""


class BackendError(EngineError):
    """A model backend call failed.

    retriable distinguishes transport-level failures (timeouts, 5xx) from
    permanent rejections (4xx, malformed requests).
    """

    def __init__(self, message: str, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class CompletionParseError(EngineError):
    """Chat completion could not be parsed into the prompt schema."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text
