"""Cross-attention weight plans: region amplification and relationship
joint-mask weighting, realized as additive logit biases.

A plan is a list of (mask, token span, lambda) entries on the latent grid.
Per region i the plan amplifies that region's tokens inside its mask. Per
relation (i, j) it amplifies the relation tokens inside the joint mask
(the union of both region masks) and suppresses each region's own tokens
in the part of the joint mask the region does not cover, pushing the
relation to materialize between the two objects rather than inside one.

Biases are additive on pre-softmax logits rather than multiplicative:
rescaling unnormalized logits is sign-unstable, and a serving backend is
free to reinterpret the serialized entries. The reference applier here
exists so the arithmetic is testable without any diffusion model.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, ValidationError
from .masks import RasterMask, downsample_majority, joint_mask, mask_difference
from .palette import BACKGROUND_REGION_ID
from .semantic import SemanticSpace


@dataclass(frozen=True)
class TokenSpan:
    """Half-open token index range [start, end) within one prompt."""

    prompt_id: str
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.start >= self.end:
            raise InvalidArgumentError(
                f"token span must satisfy 0 <= start < end, got [{self.start}, {self.end})"
            )

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class WeightEntry:
    mask: RasterMask
    span: TokenSpan
    weight: float

    def __post_init__(self):
        if not math.isfinite(self.weight):
            raise InvalidArgumentError("entry weight must be finite")
        if self.weight > 0 and self.mask.is_empty():
            raise InvalidArgumentError("amplification entries need a nonempty mask")


@dataclass(frozen=True)
class AttentionWeightPlan:
    latent_width: int
    latent_height: int
    entries: tuple[WeightEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for e in self.entries:
            if (e.mask.width, e.mask.height) != (self.latent_width, self.latent_height):
                raise InvalidArgumentError(
                    "plan entry mask does not match the latent grid dimensions"
                )


@dataclass(frozen=True)
class AttentionMap:
    """Toy pixels-by-tokens grid of pre-softmax logits."""

    latent_width: int
    latent_height: int
    tokens: int
    logits: np.ndarray  # (latent_height * latent_width, tokens)

    def __post_init__(self):
        arr = np.asarray(self.logits, dtype=np.float64)
        expected = (self.latent_height * self.latent_width, self.tokens)
        if arr.shape != expected:
            raise InvalidArgumentError(f"logits shape {arr.shape} != {expected}")
        if not np.isfinite(arr).all():
            raise InvalidArgumentError("logits must be finite")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "logits", arr)


def build_plan(
    regions: list[tuple[RasterMask, TokenSpan]],
    relations: list[tuple[int, int, TokenSpan]],
    lambda_region: float,
    lambda_relation: float,
    latent_width: int | None = None,
    latent_height: int | None = None,
) -> AttentionWeightPlan:
    """Assemble the amplification/suppression entries for a scene.

    Masks are downsampled (area-majority) to the latent grid first, and all
    joint/difference algebra happens on that grid, so the structural
    identities hold exactly on the serialized plan. Emits one positive
    entry per region; each relation (i, j) contributes three entries:

        (+lambda_relation, relation span, union of masks i and j)
        (-lambda_relation, span i, union minus mask i)
        (-lambda_relation, span j, union minus mask j)
    """
    if not regions:
        raise InvalidArgumentError("plan needs at least one region")
    w, h = regions[0][0].width, regions[0][0].height
    for mask, _ in regions:
        if (mask.width, mask.height) != (w, h):
            raise InvalidArgumentError("all region masks must share dimensions")
    lw = latent_width or w
    lh = latent_height or h

    latent = [downsample_majority(mask, lw, lh) for mask, _ in regions]
    entries: list[WeightEntry] = []
    for mask, (_, span) in zip(latent, regions):
        entries.append(WeightEntry(mask=mask, span=span, weight=lambda_region))
    for i, j, span in relations:
        if not (0 <= i < len(regions)) or not (0 <= j < len(regions)) or i == j:
            raise ValidationError(f"relation indices ({i}, {j}) are out of range")
        union = joint_mask(latent[i], latent[j])
        entries.append(WeightEntry(mask=union, span=span, weight=lambda_relation))
        entries.append(
            WeightEntry(
                mask=mask_difference(union, latent[i]),
                span=regions[i][1],
                weight=-lambda_relation,
            )
        )
        entries.append(
            WeightEntry(
                mask=mask_difference(union, latent[j]),
                span=regions[j][1],
                weight=-lambda_relation,
            )
        )
    return AttentionWeightPlan(latent_width=lw, latent_height=lh, entries=tuple(entries))


def apply_plan(a: AttentionMap, plan: AttentionWeightPlan) -> AttentionMap:
    """Reference applier: each entry adds its weight to the cells covered by
    (mask pixels x token span); untouched cells come back bit-identical.
    Additive updates commute, so entry order never matters."""
    if (plan.latent_width, plan.latent_height) != (a.latent_width, a.latent_height):
        raise InvalidArgumentError("plan and attention map latent grids differ")
    for e in plan.entries:
        if e.span.end > a.tokens:
            raise InvalidArgumentError(
                f"token span [{e.span.start}, {e.span.end}) exceeds map tokens ({a.tokens})"
            )
    out = a.logits.copy()
    for e in plan.entries:
        rows = e.mask.bits.reshape(-1)
        out[rows, e.span.start : e.span.end] += e.weight
    return AttentionMap(a.latent_width, a.latent_height, a.tokens, out)


def build_negative_prompts(space: SemanticSpace) -> dict[str, str]:
    """Per-region negative prompts: every other foreground object's type,
    comma-joined, so objects stay out of regions that are not theirs."""
    foreground = [
        s for s in space.singles if s.region_id != BACKGROUND_REGION_ID and s.object_type.strip()
    ]
    negatives: dict[str, str] = {}
    for s in space.singles:
        others = [f.object_type.strip() for f in foreground if f.region_id != s.region_id]
        negatives[s.region_id] = ", ".join(others)
    return negatives


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------


def plan_to_document(plan: AttentionWeightPlan) -> dict:
    from .pngio import encode_mask

    return {
        "latent_w": plan.latent_width,
        "latent_h": plan.latent_height,
        "entries": [
            {
                "mask_png_b64": base64.b64encode(encode_mask(e.mask)).decode("ascii"),
                "prompt_id": e.span.prompt_id,
                "start": e.span.start,
                "end": e.span.end,
                "lambda": e.weight,
            }
            for e in plan.entries
        ],
    }


def plan_from_document(data: dict) -> AttentionWeightPlan:
    from .pngio import decode_mask

    entries = []
    for doc in data.get("entries", []):
        mask = decode_mask(base64.b64decode(doc["mask_png_b64"]))
        span = TokenSpan(prompt_id=doc["prompt_id"], start=int(doc["start"]), end=int(doc["end"]))
        entries.append(WeightEntry(mask=mask, span=span, weight=float(doc["lambda"])))
    return AttentionWeightPlan(
        latent_width=int(data["latent_w"]),
        latent_height=int(data["latent_h"]),
        entries=tuple(entries),
    )


def plan_dumps(plan: AttentionWeightPlan) -> str:
    return json.dumps(plan_to_document(plan), sort_keys=True)


def plan_loads(text: str) -> AttentionWeightPlan:
    return plan_from_document(json.loads(text))
