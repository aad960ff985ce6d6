"""Deterministic offline stand-ins for the four model services.

Every mock is a pure function of its inputs (plus the seed carried inside
the request), so the whole pipeline replays bit-for-bit. The diffusion mock
draws solid blobs on a flat background and the segmentation mock recovers
them by connected components, which keeps IoU ranking meaningful without
any model weights.
"""

from __future__ import annotations

import hashlib
import json
import random
import re

import numpy as np
from scipy import ndimage

from ..errors import BackendError, InvalidArgumentError
from ..masks import RasterMask
from ..pngio import decode_mask, decode_rgb, encode_rgb
from ..seeds import derive_seed
from .base import ChatRequest, DiffusionJob, SegmentationResult

BACKGROUND_RGB = (240, 240, 240)

BLOB_COLORS = (
    (200, 60, 60),
    (60, 160, 70),
    (70, 90, 200),
    (220, 180, 40),
    (150, 60, 180),
    (60, 180, 190),
    (230, 120, 40),
    (120, 80, 50),
)


def _hash_int(*parts: str) -> int:
    digest = hashlib.sha256("|".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _draw_ellipse(arr: np.ndarray, cx: float, cy: float, rx: float, ry: float, color) -> None:
    h, w = arr.shape[:2]
    yy, xx = np.ogrid[:h, :w]
    inside = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    arr[inside] = color


class MockDiffusion:
    """Procedural image source.

    Candidate jobs (no region conditioning) place a single blob whose center
    and radius come from the seed, so a batch spreads over distinct shapes.
    Composed jobs draw one blob per region centered on that region's mask.
    """

    def generate(self, job: DiffusionJob) -> bytes:
        arr = np.empty((job.height, job.width, 3), dtype=np.uint8)
        arr[:, :] = BACKGROUND_RGB
        if job.regions:
            # small seed-driven jitter: distinct sample seeds must render
            # distinct images, like separate draws from a real model would
            rng = random.Random(derive_seed(job.seed, "mock-compose"))
            for idx, rc in enumerate(job.regions):
                if rc.mask.is_empty():
                    continue
                cx, cy = rc.mask.centroid()
                radius = max(2.0, 0.45 * float(np.sqrt(rc.mask.popcount())))
                rx = radius * rng.uniform(0.85, 1.15)
                ry = radius * rng.uniform(0.85, 1.15)
                color = BLOB_COLORS[idx % len(BLOB_COLORS)]
                _draw_ellipse(arr, cx, cy, rx, ry, color)
        else:
            # blob spread over the whole frame so a batch of seeds produces a
            # real diversity of positions and sizes for IoU ranking
            rng = random.Random(derive_seed(job.seed, "mock-diffusion", job.prompt))
            span = min(job.width, job.height)
            cx = rng.uniform(0.1 * job.width, 0.9 * job.width)
            cy = rng.uniform(0.1 * job.height, 0.9 * job.height)
            rx = rng.uniform(span / 10, span / 4)
            ry = rng.uniform(span / 10, span / 4)
            color = BLOB_COLORS[_hash_int("blob-color", job.prompt) % len(BLOB_COLORS)]
            _draw_ellipse(arr, cx, cy, rx, ry, color)
        if job.anchor_png is not None:
            edges = decode_mask(job.anchor_png)
            if (edges.width, edges.height) == (job.width, job.height):
                arr[edges.bits] = (40, 40, 40)
        return encode_rgb(arr)


class MockSegmentation:
    """Connected-component extraction: background is the modal color, the
    result is the foreground component overlapping the hint the most."""

    def extract(self, image_png: bytes, hint: RasterMask) -> SegmentationResult:
        arr = decode_rgb(image_png)
        h, w = arr.shape[:2]
        if (hint.width, hint.height) != (w, h):
            raise InvalidArgumentError("hint mask does not match image dimensions")
        packed = (
            arr[:, :, 0].astype(np.int64) << 16
            | arr[:, :, 1].astype(np.int64) << 8
            | arr[:, :, 2].astype(np.int64)
        )
        values, counts = np.unique(packed, return_counts=True)
        modal = values[int(np.argmax(counts))]
        labels, n = ndimage.label(packed != modal, structure=np.ones((3, 3), dtype=int))
        if n == 0:
            return SegmentationResult(RasterMask.empty(w, h), flagged=True)
        overlap = np.bincount(labels[hint.bits], minlength=n + 1)
        overlap[0] = 0  # label 0 is background
        best = int(np.argmax(overlap))
        if overlap[best] == 0:
            # nothing under the hint: fall back to the largest component and
            # flag the result as uncertain
            sizes = np.bincount(labels.ravel(), minlength=n + 1)
            sizes[0] = 0
            best = int(np.argmax(sizes))
            return SegmentationResult(RasterMask.from_array(labels == best), flagged=True)
        return SegmentationResult(RasterMask.from_array(labels == best), flagged=False)


# tiny relatedness table standing in for real semantic knowledge: hyponyms
# pull their vector toward the canonical noun so nearest-neighbor lookups
# land where a real embedding model would put them
_HYPONYMS = {
    "corgi": "dog", "poodle": "dog", "husky": "dog", "puppy": "dog",
    "kitten": "cat", "tabby": "cat",
    "sparrow": "bird", "robin": "bird",
    "sedan": "car", "pickup": "truck",
    "oak": "tree", "pine": "tree",
    "rose": "flower", "tulip": "flower",
}


class MockEmbedding:
    """Character-trigram hashing into a signed 256-dim unit vector; the
    image-text variant compares the text vector against the image's byte
    histogram so different renders score differently."""

    DIM = 256

    def _trigram_vector(self, text: str) -> np.ndarray:
        padded = f" {text} "
        vec = np.zeros(self.DIM, dtype=np.float64)
        for i in range(len(padded) - 2):
            digest = hashlib.sha256(padded[i : i + 3].encode("utf-8")).digest()
            idx = int.from_bytes(digest[:4], "big") % self.DIM
            sign = 1.0 if digest[4] & 1 else -1.0
            vec[idx] += sign
        return vec

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise InvalidArgumentError("cannot embed empty text")
        cleaned = text.strip().lower()
        vec = self._trigram_vector(cleaned)
        for token in cleaned.split():
            canonical = _HYPONYMS.get(token)
            if canonical:
                vec += 2.0 * self._trigram_vector(canonical)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[_hash_int("fallback", text) % self.DIM] = 1.0
            norm = 1.0
        return vec / norm

    def embed_pair(self, image_png: bytes, text: str) -> float:
        arr = decode_rgb(image_png)
        hist = np.bincount(arr.reshape(-1), minlength=256).astype(np.float64)
        norm = float(np.linalg.norm(hist))
        if norm == 0.0:
            return 0.0
        return float(np.dot(hist / norm, self.embed(text)[: hist.size]))


# Phrase pools for the chat mock. Filled fields must never contain the
# hedge words "or"/"possibly" as standalone words.
_TYPES = ("dog", "cat", "bird", "girl", "boy", "rabbit", "car", "boat")
_ATTRS = (
    "fluffy white fur", "bright red fabric", "smooth wooden texture",
    "soft golden glow", "deep blue cloth", "weathered leather",
    "shiny metallic finish", "pale green tint",
)
_STATES = (
    "standing upright", "sitting calmly", "running forward",
    "leaning slightly left", "facing the viewer", "mid stride",
    "crouching low", "resting quietly",
)
_DIRECTIONS = ("facing left", "facing right", "facing the viewer", "turned slightly away")
_VERBS = (
    "standing beside", "looking at", "walking toward",
    "sitting next to", "reaching for", "leaning against",
)
_LIGHTING = ("soft morning light", "warm sunset glow", "overcast daylight", "cool studio lighting")
_CAMERA = ("eye level medium shot", "low angle wide shot", "slightly elevated view", "close up framing")
_STYLE = ("watercolor illustration", "digital painting", "photorealistic rendering", "flat vector art")
_BG_TYPES = ("meadow", "beach", "forest", "field", "lake", "desert")

# matches the live legend sentences only; worked examples are phrased
# differently on purpose. The final legend sentence ends in a comma because
# prose continues after it.
_LEGEND_RE = re.compile(r"The ([a-z]+) region is (?:a|an) ([^.,]*)[.,]")


def _pick(pool: tuple[str, ...], *key: str) -> str:
    return pool[_hash_int(*key) % len(pool)]


class MockChat:
    """Reads the region legend back out of the rendered prompt and fills the
    answer schema with hash-chosen phrases. mode='flaky' garbles the first
    reply to exercise the caller's repair retry; mode='malformed' always
    garbles."""

    def __init__(self, mode: str = "ok", max_request_bytes: int = 4_000_000):
        if mode not in ("ok", "flaky", "malformed"):
            raise InvalidArgumentError(f"unknown mock chat mode {mode!r}")
        self.mode = mode
        self.max_request_bytes = max_request_bytes
        self.calls = 0

    def complete(self, request: ChatRequest) -> str:
        self.calls += 1
        if request.size_bytes > self.max_request_bytes:
            raise BackendError(
                f"chat request of {request.size_bytes} bytes exceeds the "
                f"{self.max_request_bytes}-byte limit",
                retriable=False,
            )
        if self.mode == "malformed" or (self.mode == "flaky" and self.calls == 1):
            return (
                "Looking at the sketch, the shapes suggest a pleasant scene with "
                "balanced composition. I would describe it in detail but the "
                "formatting escapes me right now."
            )
        found = _LEGEND_RE.findall(request.text)
        entries = []
        seen: set[str] = set()
        for color, described in found:
            if color in seen:  # legend appears twice in the prompt
                continue
            seen.add(color)
            described = described.strip()
            if described == "unlabeled object" or not described:
                described = _pick(_TYPES, "type", color)
            entries.append((color, described))
        objects = []
        for color, kind in entries:
            objects.append(
                {
                    "region": color,
                    "type": kind,
                    "attribute": ", ".join(
                        (_pick(_ATTRS, "attr0", color, kind), _pick(_ATTRS, "attr1", kind, color))
                    ),
                    "state": _pick(_STATES, "state", color, kind),
                }
            )
        objects.append(
            {
                "region": "background",
                "type": _pick(_BG_TYPES, "bg", *(c for c, _ in entries)),
                "attribute": _pick(_ATTRS, "bg-attr", *(k for _, k in entries)),
                "state": "",
            }
        )
        relations = []
        for (ca, ka), (cb, kb) in zip(entries, entries[1:]):
            relations.append(
                {
                    "subject": ca,
                    "object": cb,
                    "direction": _pick(_DIRECTIONS, "dir", ca, cb),
                    "relationship": f"{ka} {_pick(_VERBS, 'verb', ka, kb)} {kb}",
                }
            )
        doc = {
            "objects": objects,
            "relations": relations,
            "overall": {
                "lighting": _pick(_LIGHTING, "light", *(c for c, _ in entries)),
                "camera": _pick(_CAMERA, "camera", *(c for c, _ in entries)),
                "style": _pick(_STYLE, "style", *(c for c, _ in entries)),
            },
        }
        reasoning = (
            "Reading the mask: each colored region occupies a distinct area, so "
            "the objects are spatially separated, and relative placement tells "
            "me who is beside whom. Sizes look proportionate, therefore the "
            "scene reads as a single coherent moment.\n\nFinal output:\n"
        )
        return reasoning + json.dumps(doc, indent=2)


def mock_backends(chat_mode: str = "ok", max_request_bytes: int = 4_000_000):
    from .base import Backends

    return Backends(
        diffusion=MockDiffusion(),
        segmentation=MockSegmentation(),
        embedding=MockEmbedding(),
        chat=MockChat(mode=chat_mode, max_request_bytes=max_request_bytes),
    )
