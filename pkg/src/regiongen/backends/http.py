"""HTTP clients for remotely served model backends.

Transport failures and 5xx responses are retried up to the configured
budget; 4xx responses are permanent and surface immediately. A shared
httpx client may be injected, which is how tests drive these against an
in-process ASGI app.
"""

from __future__ import annotations

import base64
import os

import httpx
import numpy as np

from ..errors import BackendError
from ..masks import RasterMask
from ..pngio import decode_mask, encode_mask
from .base import (
    BackendConfig,
    Backends,
    ChatRequest,
    DiffusionJob,
    SegmentationResult,
    chat_request_to_document,
    diffusion_job_to_document,
)


def _headers(cfg: BackendConfig) -> dict[str, str]:
    token = os.environ.get(cfg.auth_env, "") if cfg.auth_env else ""
    return {"Authorization": f"Bearer {token}"} if token else {}


class _HttpBase:
    def __init__(self, cfg: BackendConfig, client: httpx.Client | None = None):
        self._cfg = cfg
        self._client = client or httpx.Client(
            base_url=cfg.base_url, timeout=cfg.timeout, headers=_headers(cfg)
        )

    def _post(self, path: str, body: dict) -> dict:
        attempts = self._cfg.retries + 1
        last: Exception | None = None
        for _ in range(attempts):
            try:
                resp = self._client.post(path, json=body)
            except httpx.HTTPError as exc:
                last = BackendError(f"transport failure on {path}: {exc}", retriable=True)
                continue
            if resp.status_code >= 500:
                last = BackendError(f"{path} returned {resp.status_code}", retriable=True)
                continue
            if resp.status_code >= 400:
                raise BackendError(
                    f"{path} rejected the request ({resp.status_code}): {resp.text[:200]}",
                    retriable=False,
                )
            return resp.json()
        assert last is not None
        raise last


class HttpDiffusion(_HttpBase):
    def generate(self, job: DiffusionJob) -> bytes:
        data = self._post("/v1/diffusion/generate", diffusion_job_to_document(job))
        return base64.b64decode(data["image_png_b64"])


class HttpSegmentation(_HttpBase):
    def extract(self, image_png: bytes, hint: RasterMask) -> SegmentationResult:
        body = {
            "image_png_b64": base64.b64encode(image_png).decode("ascii"),
            "hint_mask_png_b64": base64.b64encode(encode_mask(hint)).decode("ascii"),
        }
        data = self._post("/v1/segment/extract", body)
        return SegmentationResult(
            mask=decode_mask(base64.b64decode(data["mask_png_b64"])),
            flagged=bool(data.get("flagged", False)),
        )


class HttpEmbedding(_HttpBase):
    def embed(self, text: str) -> np.ndarray:
        data = self._post("/v1/embed", {"text": text})
        return np.asarray(data["vector"], dtype=np.float64)

    def embed_pair(self, image_png: bytes, text: str) -> float:
        body = {"text": text, "image_png_b64": base64.b64encode(image_png).decode("ascii")}
        data = self._post("/v1/embed", body)
        return float(data["similarity"])


class HttpChat(_HttpBase):
    def complete(self, request: ChatRequest) -> str:
        data = self._post("/v1/chat", chat_request_to_document(request))
        return data["text"]


def http_backends(cfg: BackendConfig, client: httpx.Client | None = None) -> Backends:
    shared = client or httpx.Client(base_url=cfg.base_url, timeout=cfg.timeout, headers=_headers(cfg))
    return Backends(
        diffusion=HttpDiffusion(cfg, shared),
        segmentation=HttpSegmentation(cfg, shared),
        embedding=HttpEmbedding(cfg, shared),
        chat=HttpChat(cfg, shared),
    )
