"""Engine configuration: every tunable default in one place.

Values here fill the gaps the method leaves open; all are exposed through
the config file so deployments can override them without code changes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass(frozen=True)
class EngineConfig:
    # canvas / geometry
    canvas_size: int = 1024          # sketch canvas is square, SDXL-native
    latent_downscale: int = 8        # attention plans live on canvas/8 grids

    # single-object candidate stage
    candidate_resolution: int = 512
    candidate_steps: int = 6
    candidate_batch: int = 12
    candidate_top_k: int = 4
    weight_iou: float = 0.5          # candidate score = w_iou*iou + w_clip*clip_norm
    weight_clip: float = 0.5

    # final generation
    final_steps: int = 30

    # attention weighting
    lambda_region: float = 2.5       # amplification inside each region
    lambda_relation: float = 1.5     # relationship joint-mask weighting

    # edge anchoring
    canny_low: float = 0.1
    canny_high: float = 0.3

    # lexicon sampling
    sample_k: int = 10

    # chat backend decoding
    chat_temperature: float = 0.2
    chat_max_tokens: int = 2048
    chat_max_request_bytes: int = 4_000_000

    # backend transport
    backend_timeout: float = 60.0
    backend_retries: int = 2

    def __post_init__(self):
        if self.canvas_size <= 0 or self.canvas_size % self.latent_downscale:
            raise ValueError("canvas_size must be a positive multiple of latent_downscale")
        if abs(self.weight_iou + self.weight_clip - 1.0) > 1e-9:
            raise ValueError("score weights must sum to 1")
        if not (0.0 <= self.canny_low < self.canny_high <= 1.0):
            raise ValueError("canny thresholds must satisfy 0 <= low < high <= 1")

    @property
    def latent_size(self) -> int:
        return self.canvas_size // self.latent_downscale

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(data: dict) -> "EngineConfig":
        known = {f: data[f] for f in EngineConfig.__dataclass_fields__ if f in data}
        return EngineConfig(**known)

    @staticmethod
    def load(path: str | Path) -> "EngineConfig":
        with open(path, encoding="utf-8") as fh:
            return EngineConfig.from_json(json.load(fh))


DEFAULT_CONFIG = EngineConfig()
