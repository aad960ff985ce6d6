"""Shared backend types, protocols, and wire encoding.

Four external model services sit behind small client interfaces: diffusion
(image generation), segmentation (object mask extraction), embedding (text
vectors plus image-text similarity), and chat (multimodal completion).
Every implementation, mock or HTTP, speaks the same in-process types; the
document encoders here define the HTTP bodies so client and server cannot
drift apart.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..attention import AttentionWeightPlan, plan_from_document, plan_to_document
from ..errors import InvalidArgumentError
from ..masks import RasterMask


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"
    base_url: str = ""
    timeout: float = 60.0
    retries: int = 2
    auth_env: str = ""  # name of the env var holding a bearer token, never the token itself

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise InvalidArgumentError(f"backend kind must be 'mock' or 'http', got {self.kind!r}")
        if self.kind == "http" and not self.base_url:
            raise InvalidArgumentError("http backends need a base_url")
        if self.timeout <= 0:
            raise InvalidArgumentError("timeout must be positive")
        if self.retries < 0:
            raise InvalidArgumentError("retries must be >= 0")


@dataclass(frozen=True)
class RegionConditioning:
    """One region's slice of a composed generation: where it goes and what
    text governs it."""

    prompt_id: str
    prompt: str
    mask: RasterMask
    negative: str = ""

    def __post_init__(self):
        if not self.prompt.strip():
            raise InvalidArgumentError(f"region {self.prompt_id!r} has an empty prompt")


@dataclass(frozen=True)
class DiffusionJob:
    prompt: str
    width: int
    height: int
    steps: int
    seed: int
    negative_prompt: str = ""
    anchor_png: bytes | None = None
    plan: AttentionWeightPlan | None = None
    regions: tuple[RegionConditioning, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if self.width <= 0 or self.height <= 0 or self.width % 8 or self.height % 8:
            raise InvalidArgumentError(
                f"image dimensions must be positive multiples of 8, got {self.width}x{self.height}"
            )
        if self.steps < 1:
            raise InvalidArgumentError("steps must be >= 1")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be non-negative")
        for rc in self.regions:
            if (rc.mask.width, rc.mask.height) != (self.width, self.height):
                raise InvalidArgumentError(
                    f"region {rc.prompt_id!r} mask does not match job dimensions"
                )


@dataclass(frozen=True)
class SegmentationResult:
    mask: RasterMask
    flagged: bool = False  # set when nothing overlapped the hint


@dataclass(frozen=True)
class ChatRequest:
    text: str
    image_png: bytes
    max_tokens: int = 2048
    temperature: float = 0.2

    def __post_init__(self):
        if not self.text.strip():
            raise InvalidArgumentError("chat request text must be nonempty")
        if self.max_tokens < 1:
            raise InvalidArgumentError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise InvalidArgumentError("temperature must be >= 0")

    @property
    def size_bytes(self) -> int:
        return len(self.text.encode("utf-8")) + len(self.image_png)


class DiffusionBackend(Protocol):
    def generate(self, job: DiffusionJob) -> bytes: ...


class SegmentationBackend(Protocol):
    def extract(self, image_png: bytes, hint: RasterMask) -> SegmentationResult: ...


class EmbeddingBackend(Protocol):
    def embed(self, text: str) -> np.ndarray: ...

    def embed_pair(self, image_png: bytes, text: str) -> float: ...


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


@dataclass(frozen=True)
class Backends:
    diffusion: DiffusionBackend
    segmentation: SegmentationBackend
    embedding: EmbeddingBackend
    chat: ChatBackend


# ---------------------------------------------------------------------------
# Wire documents (HTTP bodies; binary payloads base64-encoded)
# ---------------------------------------------------------------------------


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text)


def diffusion_job_to_document(job: DiffusionJob) -> dict:
    from ..pngio import encode_mask

    doc: dict = {
        "prompt": job.prompt,
        "negative_prompt": job.negative_prompt,
        "width": job.width,
        "height": job.height,
        "steps": job.steps,
        "seed": job.seed,
    }
    if job.anchor_png is not None:
        doc["anchor_png_b64"] = _b64(job.anchor_png)
    if job.plan is not None:
        doc["plan"] = plan_to_document(job.plan)
    if job.regions:
        doc["regions"] = [
            {
                "prompt_id": rc.prompt_id,
                "prompt": rc.prompt,
                "negative": rc.negative,
                "mask_png_b64": _b64(encode_mask(rc.mask)),
            }
            for rc in job.regions
        ]
    return doc


def diffusion_job_from_document(doc: dict) -> DiffusionJob:
    from ..pngio import decode_mask

    anchor = doc.get("anchor_png_b64")
    plan = doc.get("plan")
    regions = tuple(
        RegionConditioning(
            prompt_id=r["prompt_id"],
            prompt=r["prompt"],
            negative=r.get("negative", ""),
            mask=decode_mask(_unb64(r["mask_png_b64"])),
        )
        for r in doc.get("regions", [])
    )
    return DiffusionJob(
        prompt=doc["prompt"],
        negative_prompt=doc.get("negative_prompt", ""),
        width=int(doc["width"]),
        height=int(doc["height"]),
        steps=int(doc["steps"]),
        seed=int(doc["seed"]),
        anchor_png=_unb64(anchor) if anchor else None,
        plan=plan_from_document(plan) if plan else None,
        regions=regions,
    )


def chat_request_to_document(req: ChatRequest) -> dict:
    return {
        "text": req.text,
        "image": _b64(req.image_png),
        "max_tokens": req.max_tokens,
        "temperature": req.temperature,
    }


def chat_request_from_document(doc: dict) -> ChatRequest:
    return ChatRequest(
        text=doc["text"],
        image_png=_unb64(doc.get("image", "")),
        max_tokens=int(doc.get("max_tokens", 2048)),
        temperature=float(doc.get("temperature", 0.2)),
    )
