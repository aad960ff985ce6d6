from .base import (
    BackendConfig,
    Backends,
    ChatBackend,
    ChatRequest,
    DiffusionBackend,
    DiffusionJob,
    EmbeddingBackend,
    RegionConditioning,
    SegmentationBackend,
    SegmentationResult,
    chat_request_from_document,
    chat_request_to_document,
    diffusion_job_from_document,
    diffusion_job_to_document,
)
from .http import http_backends
from .mock import MockChat, MockDiffusion, MockEmbedding, MockSegmentation, mock_backends


def create_backends(cfg: BackendConfig, max_request_bytes: int = 4_000_000) -> Backends:
    """Build a backend set from config: fully in-process mocks, or HTTP
    clients against cfg.base_url."""
    if cfg.kind == "mock":
        return mock_backends(max_request_bytes=max_request_bytes)
    return http_backends(cfg)


__all__ = [
    "BackendConfig",
    "Backends",
    "ChatBackend",
    "ChatRequest",
    "DiffusionBackend",
    "DiffusionJob",
    "EmbeddingBackend",
    "MockChat",
    "MockDiffusion",
    "MockEmbedding",
    "MockSegmentation",
    "RegionConditioning",
    "SegmentationBackend",
    "SegmentationResult",
    "chat_request_from_document",
    "chat_request_to_document",
    "create_backends",
    "diffusion_job_from_document",
    "diffusion_job_to_document",
    "http_backends",
    "mock_backends",
]
