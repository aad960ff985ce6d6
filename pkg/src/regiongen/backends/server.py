"""Model server: exposes a backend set (the mocks by default) over the
backend wire protocol, so the HTTP clients have something real to talk to
in tests and demos."""

from __future__ import annotations

import base64

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..errors import BackendError, EngineError
from ..pngio import decode_mask, encode_mask
from .base import Backends, chat_request_from_document, diffusion_job_from_document
from .mock import mock_backends


class _EmbedBody(BaseModel):
    text: str
    image_png_b64: str | None = None


class _SegmentBody(BaseModel):
    image_png_b64: str
    hint_mask_png_b64: str


def create_model_server(backends: Backends | None = None) -> FastAPI:
    backends = backends or mock_backends()
    app = FastAPI(title="regiongen model server")

    @app.exception_handler(EngineError)
    async def _engine_error(request, exc: EngineError):
        if isinstance(exc, BackendError) and exc.retriable:
            return JSONResponse(status_code=503, content={"detail": str(exc)})
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/diffusion/generate")
    def generate(body: dict):
        job = diffusion_job_from_document(body)
        image = backends.diffusion.generate(job)
        return {"image_png_b64": base64.b64encode(image).decode("ascii")}

    @app.post("/v1/segment/extract")
    def extract(body: _SegmentBody):
        image = base64.b64decode(body.image_png_b64)
        hint = decode_mask(base64.b64decode(body.hint_mask_png_b64))
        result = backends.segmentation.extract(image, hint)
        return {
            "mask_png_b64": base64.b64encode(encode_mask(result.mask)).decode("ascii"),
            "flagged": result.flagged,
        }

    @app.post("/v1/embed")
    def embed(body: _EmbedBody):
        if body.image_png_b64 is not None:
            image = base64.b64decode(body.image_png_b64)
            return {"similarity": backends.embedding.embed_pair(image, body.text)}
        return {"vector": backends.embedding.embed(body.text).tolist()}

    @app.post("/v1/chat")
    def chat(body: dict):
        request = chat_request_from_document(body)
        return {"text": backends.chat.complete(request)}

    return app
