"""Decompose-and-recompose orchestration.

Each foreground object is generated alone at low cost, segmented, scored
against the user's sketch region, and offered back as ranked candidates.
A selected candidate replaces the rough region mask, can be nudged with an
affine transform, and finally every placed object is recomposed into one
generation request: composed edge anchor, disjoint region masks, attention
weight plan, and per-region positive/negative prompts.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, replace

import numpy as np

from .attention import (
    AttentionWeightPlan,
    TokenSpan,
    build_negative_prompts,
    build_plan,
    plan_from_document,
    plan_to_document,
)
from .backends.base import Backends, DiffusionJob, RegionConditioning
from .categories import CategoryList, default_categories
from .config import DEFAULT_CONFIG, EngineConfig
from .errors import BackendError, ConflictError, InvalidArgumentError, ValidationError
from .masks import (
    AffineTransform,
    EdgeMap,
    RasterMask,
    Region,
    apply_transform,
    canny,
    compose_anchor,
    iou,
    resize_mask,
)
from .palette import BACKGROUND_REGION_ID
from .pngio import decode_mask, decode_rgb, encode_mask, luminance
from .seeds import derive_seed
from .semantic import SemanticSpace, flatten_region, relationship_prompt, validate


@dataclass(frozen=True)
class Candidate:
    image_png: bytes
    extracted_mask: RasterMask
    iou: float
    clip_score: float
    clip_norm: float
    combined: float
    seed: int
    batch_index: int
    flagged: bool = False

    def __post_init__(self):
        if not (0.0 <= self.iou <= 1.0):
            raise InvalidArgumentError(f"iou {self.iou} outside [0,1]")
        if not (0.0 <= self.combined <= 1.0 + 1e-9):
            raise InvalidArgumentError(f"combined score {self.combined} outside [0,1]")


@dataclass(frozen=True)
class CandidateRound:
    """One regenerate-round of ranked candidates for a region. Selections
    carry the version so a stale pick is refused."""

    region_id: str
    version: int
    prompt: str
    candidates: tuple[Candidate, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if self.version < 1:
            raise InvalidArgumentError("round version starts at 1")


@dataclass(frozen=True)
class ObjectPlacement:
    region_id: str
    chosen: Candidate
    transform: AffineTransform
    z: int
    version: int
    clipped: bool = False


@dataclass(frozen=True)
class SampleResult:
    index: int
    seed: int
    image_png: bytes | None = None
    error: str | None = None


@dataclass(frozen=True)
class GenerationRequest:
    width: int
    height: int
    steps: int
    seed: int
    samples: int
    base_prompt: str
    anchor_png: bytes
    regions: tuple[RegionConditioning, ...]
    plan: AttentionWeightPlan
    negative_prompt: str = ""

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if self.samples < 1:
            raise InvalidArgumentError("samples must be >= 1")
        masks = [rc.mask for rc in self.regions]
        for m in masks:
            if (m.width, m.height) != (self.width, self.height):
                raise InvalidArgumentError("request region masks must match canvas dimensions")
        for i in range(len(masks)):
            for j in range(i + 1, len(masks)):
                if np.logical_and(masks[i].bits, masks[j].bits).any():
                    raise InvalidArgumentError(
                        f"region masks {self.regions[i].prompt_id!r} and "
                        f"{self.regions[j].prompt_id!r} overlap"
                    )


def classify(object_type: str, cats: CategoryList, embed) -> str:
    """'thing' for countable shaped objects, 'stuff' for amorphous regions.
    Exact lowercase match first, then cosine-nearest category noun."""
    noun = object_type.strip().lower()
    if not noun:
        raise InvalidArgumentError("cannot classify an empty object type")
    if noun in cats.things:
        return "thing"
    if noun in cats.stuff:
        return "stuff"
    target = embed.embed(noun)
    best_noun = None
    best_score = -np.inf
    for candidate in cats.all_nouns:
        score = float(np.dot(target, embed.embed(candidate)))
        if score > best_score:
            best_score = score
            best_noun = candidate
    return "thing" if best_noun in cats.things else "stuff"


def generate_candidates(
    region: Region,
    prompt: str,
    backends: Backends,
    seed: int,
    version: int = 1,
    config: EngineConfig = DEFAULT_CONFIG,
) -> list[Candidate]:
    """One decompose round: a batch of low-step single-object images, each
    segmented and scored, returning the ranked head of the batch."""
    if not prompt.strip():
        raise InvalidArgumentError("candidate prompt must be nonempty")
    res = config.candidate_resolution
    target = resize_mask(region.mask, res, res)
    scored: list[tuple[int, int, bytes, RasterMask, float, float, bool]] = []
    failures: list[str] = []
    for i in range(config.candidate_batch):
        job_seed = derive_seed(seed, "candidate", region.region_id, str(version), str(i))
        try:
            image = backends.diffusion.generate(
                DiffusionJob(
                    prompt=prompt,
                    width=res,
                    height=res,
                    steps=config.candidate_steps,
                    seed=job_seed,
                )
            )
            seg = backends.segmentation.extract(image, target)
            overlap = iou(seg.mask, target)
            clip = backends.embedding.embed_pair(image, prompt)
        except BackendError as exc:
            failures.append(f"batch item {i}: {exc}")
            continue
        if seg.mask.is_empty():
            failures.append(f"batch item {i}: segmentation found no object")
            continue
        scored.append((i, job_seed, image, seg.mask, overlap, clip, seg.flagged))
    if len(scored) < config.candidate_top_k:
        raise BackendError(
            f"only {len(scored)}/{config.candidate_batch} candidates succeeded "
            f"(need {config.candidate_top_k}): " + "; ".join(failures),
            retriable=True,
        )
    clips = [s[5] for s in scored]
    lo, hi = min(clips), max(clips)
    candidates = []
    for i, job_seed, image, mask, overlap, clip, flagged in scored:
        norm = 0.5 if hi == lo else (clip - lo) / (hi - lo)
        combined = config.weight_iou * overlap + config.weight_clip * norm
        candidates.append(
            Candidate(
                image_png=image,
                extracted_mask=mask,
                iou=overlap,
                clip_score=clip,
                clip_norm=norm,
                combined=combined,
                seed=job_seed,
                batch_index=i,
                flagged=flagged,
            )
        )
    candidates.sort(key=lambda c: (-c.combined, -c.iou, c.batch_index))
    return candidates[: config.candidate_top_k]


def select_candidate(
    round_: CandidateRound,
    region: Region,
    index: int,
    expected_version: int | None = None,
) -> ObjectPlacement:
    if expected_version is not None and expected_version != round_.version:
        raise ConflictError(
            f"candidate list for {region.region_id!r} is at version {round_.version}, "
            f"selection targeted version {expected_version}"
        )
    if not (0 <= index < len(round_.candidates)):
        raise InvalidArgumentError(
            f"candidate index {index} out of range 0..{len(round_.candidates) - 1}"
        )
    if round_.candidates[index].extracted_mask.is_empty():
        raise InvalidArgumentError(
            f"candidate {index} for {region.region_id!r} has an empty extracted mask"
        )
    return ObjectPlacement(
        region_id=region.region_id,
        chosen=round_.candidates[index],
        transform=AffineTransform(),
        z=region.palette_index,
        version=round_.version,
    )


def placed_mask(placement: ObjectPlacement, canvas: int) -> RasterMask:
    """The placement's active mask on the canvas: extracted candidate mask
    upscaled then run through the accumulated transform."""
    full = resize_mask(placement.chosen.extracted_mask, canvas, canvas)
    return apply_transform(full, placement.transform)


def _is_clipped(mask_canvas: RasterMask, t: AffineTransform) -> bool:
    # forward-map the content bounding box; clipping means it leaves canvas
    if mask_canvas.is_empty():
        return False
    ys, xs = np.nonzero(mask_canvas.bits)
    w, h = mask_canvas.width, mask_canvas.height
    cx, cy = w / 2.0, h / 2.0
    corners_x = [float(xs.min()), float(xs.max()) + 1.0]
    corners_y = [float(ys.min()), float(ys.max()) + 1.0]
    for x in corners_x:
        mapped = (x - cx) * t.scale + cx + t.dx
        if mapped < 0 or mapped > w:
            return True
    for y in corners_y:
        mapped = (y - cy) * t.scale + cy + t.dy
        if mapped < 0 or mapped > h:
            return True
    return False


def adjust_placement(
    placement: ObjectPlacement, t: AffineTransform, canvas: int
) -> ObjectPlacement:
    combined = placement.transform.compose(t)
    base = resize_mask(placement.chosen.extracted_mask, canvas, canvas)
    return replace(placement, transform=combined, clipped=_is_clipped(base, combined))


def _span(prompt_id: str, text: str) -> TokenSpan:
    n = max(1, len(text.split()))
    return TokenSpan(prompt_id=prompt_id, start=0, end=n)


def assemble_request(
    regions: list[Region],
    space: SemanticSpace,
    placements: dict[str, ObjectPlacement],
    backends: Backends,
    seed: int,
    samples: int = 1,
    cats: CategoryList | None = None,
    config: EngineConfig = DEFAULT_CONFIG,
) -> GenerationRequest:
    """Recompose everything into one generation request.

    Placed objects contribute canny edges of their chosen candidate
    (restricted to its mask) as the shape anchor; stuff regions join as
    mask+prompt only; the background takes the leftover canvas. Higher
    palette layers occlude lower ones, so the final masks are disjoint."""
    violations = validate(space, regions)
    if violations:
        raise ValidationError("semantic space is not valid", violations=violations)
    cats = cats or default_categories()
    canvas = config.canvas_size

    kinds: dict[str, str] = {}
    for r in regions:
        single = space.single_for(r.region_id)
        kinds[r.region_id] = classify(single.object_type, cats, backends.embedding)
    missing = [
        rid for rid, kind in kinds.items() if kind == "thing" and rid not in placements
    ]
    if missing:
        raise ValidationError(
            "thing regions need a selected candidate before generation: "
            + ", ".join(sorted(missing)),
            violations=[],
        )

    layered: list[tuple[EdgeMap, RasterMask, int]] = []
    order: list[str] = []
    for r in sorted(regions, key=lambda r: r.palette_index):
        if kinds[r.region_id] == "thing":
            p = placements[r.region_id]
            arr = decode_rgb(p.chosen.image_png)
            gray = luminance(arr)
            edges = canny(gray, config.canny_low, config.canny_high)
            inside = np.logical_and(edges.bits, p.chosen.extracted_mask.bits)
            edges512 = RasterMask.from_array(inside)
            edges_canvas = apply_transform(resize_mask(edges512, canvas, canvas), p.transform)
            mask_canvas = placed_mask(p, canvas)
        else:
            edges_canvas = RasterMask.empty(canvas, canvas)
            mask_canvas = r.mask
        layered.append((edges_canvas, mask_canvas, r.palette_index))
        order.append(r.region_id)
    anchor, occluded = compose_anchor(layered)
    hidden = [rid for rid, m in zip(order, occluded) if m.is_empty()]
    if hidden:
        raise ValidationError(
            "regions fully occluded by higher layers: " + ", ".join(hidden),
            violations=[],
        )

    covered = np.zeros((canvas, canvas), dtype=bool)
    for m in occluded:
        covered |= m.bits
    background = RasterMask.from_array(~covered)

    negatives = build_negative_prompts(space)
    conditioning: list[RegionConditioning] = []
    plan_regions: list[tuple[RasterMask, TokenSpan]] = []
    index_of: dict[str, int] = {}
    for rid, mask in zip(order, occluded):
        prompt = flatten_region(space.single_for(rid), space.overall)
        conditioning.append(
            RegionConditioning(
                prompt_id=rid, prompt=prompt, negative=negatives.get(rid, ""), mask=mask
            )
        )
        index_of[rid] = len(plan_regions)
        plan_regions.append((mask, _span(rid, prompt)))
    bg_single = space.single_for(BACKGROUND_REGION_ID)
    bg_prompt = flatten_region(bg_single, space.overall) or "background"
    conditioning.append(
        RegionConditioning(
            prompt_id=BACKGROUND_REGION_ID,
            prompt=bg_prompt,
            negative=negatives.get(BACKGROUND_REGION_ID, ""),
            mask=background,
        )
    )
    if not background.is_empty():
        index_of[BACKGROUND_REGION_ID] = len(plan_regions)
        plan_regions.append((background, _span(BACKGROUND_REGION_ID, bg_prompt)))

    relations = []
    for cross in space.crosses:
        if cross.subject_id not in index_of or cross.object_id not in index_of:
            raise ValidationError(
                f"relation {cross.subject_id!r}->{cross.object_id!r} references a "
                "region with no visible area",
                violations=[],
            )
        text = relationship_prompt(cross, space)
        rel_id = f"rel:{cross.subject_id}:{cross.object_id}"
        relations.append(
            (index_of[cross.subject_id], index_of[cross.object_id], _span(rel_id, text))
        )
    plan = build_plan(
        plan_regions,
        relations,
        lambda_region=config.lambda_region,
        lambda_relation=config.lambda_relation,
        latent_width=config.latent_size,
        latent_height=config.latent_size,
    )

    foreground_types = [
        space.single_for(rid).object_type for rid in order if space.single_for(rid).object_type
    ]
    base_prompt = ", ".join(foreground_types + list(space.overall.phrases())) or bg_prompt
    return GenerationRequest(
        width=canvas,
        height=canvas,
        steps=config.final_steps,
        seed=seed,
        samples=samples,
        base_prompt=base_prompt,
        anchor_png=encode_mask(anchor),
        regions=tuple(conditioning),
        plan=plan,
    )


def run_generation(req: GenerationRequest, diffusion) -> list[SampleResult]:
    """One backend call per sample, each with its own derived seed; failures
    become per-sample error records instead of aborting the batch."""
    results = []
    for i in range(req.samples):
        sample_seed = derive_seed(req.seed, "sample", str(i))
        job = DiffusionJob(
            prompt=req.base_prompt,
            negative_prompt=req.negative_prompt,
            width=req.width,
            height=req.height,
            steps=req.steps,
            seed=sample_seed,
            anchor_png=req.anchor_png,
            plan=req.plan,
            regions=req.regions,
        )
        try:
            image = diffusion.generate(job)
            results.append(SampleResult(index=i, seed=sample_seed, image_png=image))
        except BackendError as exc:
            results.append(SampleResult(index=i, seed=sample_seed, error=str(exc)))
    return results


# ---------------------------------------------------------------------------
# Wire format for GenerationRequest (persisted and replayed verbatim)
# ---------------------------------------------------------------------------


def request_to_document(req: GenerationRequest) -> dict:
    return {
        "width": req.width,
        "height": req.height,
        "steps": req.steps,
        "seed": req.seed,
        "samples": req.samples,
        "base_prompt": req.base_prompt,
        "negative_prompt": req.negative_prompt,
        "anchor_png_b64": base64.b64encode(req.anchor_png).decode("ascii"),
        "regions": [
            {
                "prompt_id": rc.prompt_id,
                "prompt": rc.prompt,
                "negative": rc.negative,
                "mask_png_b64": base64.b64encode(encode_mask(rc.mask)).decode("ascii"),
            }
            for rc in req.regions
        ],
        "plan": plan_to_document(req.plan),
    }


def request_from_document(doc: dict) -> GenerationRequest:
    return GenerationRequest(
        width=int(doc["width"]),
        height=int(doc["height"]),
        steps=int(doc["steps"]),
        seed=int(doc["seed"]),
        samples=int(doc["samples"]),
        base_prompt=doc["base_prompt"],
        negative_prompt=doc.get("negative_prompt", ""),
        anchor_png=base64.b64decode(doc["anchor_png_b64"]),
        regions=tuple(
            RegionConditioning(
                prompt_id=r["prompt_id"],
                prompt=r["prompt"],
                negative=r.get("negative", ""),
                mask=decode_mask(base64.b64decode(r["mask_png_b64"])),
            )
            for r in doc.get("regions", [])
        ),
        plan=plan_from_document(doc["plan"]),
    )


def request_dumps(req: GenerationRequest) -> str:
    return json.dumps(request_to_document(req), sort_keys=True, indent=1)
