"""HTTP service exposing the sketch-to-image workflow.

Handlers follow validate-first, persist-last: every 4xx is raised before
any disk write, so failed requests leave the session byte-identical. Writes
for one session are serialized by a per-session lock; distinct sessions run
fully in parallel.
"""

from __future__ import annotations

import base64
from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .backends import Backends, mock_backends
from .categories import default_categories
from .config import DEFAULT_CONFIG, EngineConfig
from .errors import (
    BackendError,
    CompletionParseError,
    ConflictError,
    EngineError,
    FormatError,
    ValidationError,
)
from .lexicon import Lexicon, SampleConfig, sample_attributes, sample_relationships
from .masks import AffineTransform
from .palette import PALETTE, WHITE, LegendEntry, color_name, legend_from_json
from .pipeline import (
    CandidateRound,
    adjust_placement,
    assemble_request,
    classify,
    generate_candidates,
    request_to_document,
    run_generation,
    select_candidate,
)
from .recommend import infer_space, render_template
from .seeds import derive_seed
from .semantic import (
    flatten_region,
    from_document,
    merge_user_first,
    skeleton,
    to_document,
    validate,
)
from .session import SessionState, SessionStore


class CreateSessionBody(BaseModel):
    seed: int | None = Field(default=None, ge=0)


class SketchBody(BaseModel):
    png_b64: str
    legend: dict = Field(default_factory=dict)


class SpaceBody(BaseModel):
    space: dict


class SelectBody(BaseModel):
    version: int


class PlacementBody(BaseModel):
    dx: float = 0.0
    dy: float = 0.0
    scale: float = 1.0


class GenerateBody(BaseModel):
    samples: int = Field(default=1, ge=1, le=16)
    seed: int | None = Field(default=None, ge=0)


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def create_app(
    config: EngineConfig = DEFAULT_CONFIG,
    backends: Backends | None = None,
    data_dir: str | Path = "data",
    lexicon: Lexicon | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    backends = backends or mock_backends(max_request_bytes=config.chat_max_request_bytes)
    store = SessionStore(Path(data_dir) / "sessions")
    lexicon = lexicon or Lexicon()
    app = FastAPI(title="regiongen service")

    @app.exception_handler(EngineError)
    async def _engine_error(request: Request, exc: EngineError):
        if isinstance(exc, ConflictError):
            status = 409
        elif isinstance(exc, (BackendError, CompletionParseError)):
            status = 502
        else:
            status = 422
        detail: dict = {"detail": str(exc)}
        if isinstance(exc, ValidationError) and exc.violations:
            detail["violations"] = [
                {"region_id": v.region_id, "field": v.field, "message": v.message}
                for v in exc.violations
            ]
        if isinstance(exc, CompletionParseError) and exc.raw_text:
            detail["raw_text"] = exc.raw_text
        return JSONResponse(status_code=status, content=detail)

    @app.exception_handler(KeyError)
    async def _not_found(request: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={"detail": f"not found: {exc}"})

    def _load(session_id: str) -> SessionState:
        return store.load(session_id)

    def _region(state: SessionState, region_id: str):
        for r in state.regions(config.canvas_size):
            if r.region_id == region_id:
                return r
        raise KeyError(region_id)

    def _space_or_conflict(state: SessionState):
        if state.space is None:
            raise ConflictError("session has no semantic space yet; run infer or PUT one")
        return state.space

    def _placement_doc(p) -> dict:
        return {
            "region_id": p.region_id,
            "version": p.version,
            "dx": p.transform.dx,
            "dy": p.transform.dy,
            "scale": p.transform.scale,
            "z": p.z,
            "clipped": p.clipped,
        }

    # -- meta --------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/config")
    def get_config():
        return config.to_json()

    @app.get("/palette")
    def get_palette():
        return {
            "background": WHITE,
            "colors": [
                {"hex": hex_, "name": name, "z": i} for i, (hex_, name) in enumerate(PALETTE)
            ],
        }

    # -- sessions ----------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody | None = None):
        seed = body.seed if body else None
        state = store.create(seed=seed)
        return {"session_id": state.session_id, "seed": state.seed}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        state = _load(session_id)
        regions = state.regions(config.canvas_size) if state.sketch_png else []
        return {
            "session_id": state.session_id,
            "seed": state.seed,
            "created_at": state.created_at,
            "updated_at": state.updated_at,
            "has_sketch": state.sketch_png is not None,
            "regions": [
                {
                    "region_id": r.region_id,
                    "color": r.color,
                    "name": color_name(r.color),
                    "z": r.palette_index,
                    "area": r.mask.popcount(),
                    "object_type": r.object_type,
                }
                for r in regions
            ],
            "space": to_document(state.space) if state.space else None,
            "rounds": {
                rid: {"version": rnd.version, "count": len(rnd.candidates)}
                for rid, rnd in state.rounds.items()
            },
            "placements": {rid: _placement_doc(p) for rid, p in state.placements.items()},
            "result_count": len(state.results),
        }

    @app.put("/sessions/{session_id}/sketch")
    def put_sketch(session_id: str, body: SketchBody):
        with store.lock(session_id):
            state = _load(session_id)
            legend = legend_from_json(body.legend)
            try:
                png = base64.b64decode(body.png_b64, validate=True)
            except (ValueError, TypeError) as exc:
                raise FormatError(f"sketch payload is not valid base64: {exc}") from exc
            probe = replace(state, sketch_png=png, legend=legend)
            regions = probe.regions(config.canvas_size)  # validates palette + size
            same_ids = state.sketch_png is not None and {
                r.region_id for r in regions
            } == {r.region_id for r in state.regions(config.canvas_size)}
            state = replace(
                probe,
                space=state.space if same_ids else None,
                rounds={},
                placements={},
                results=(),
                request=None,
            ).touched()
            store.save(state)
            return {
                "regions": [
                    {
                        "region_id": r.region_id,
                        "color": r.color,
                        "name": color_name(r.color),
                        "z": r.palette_index,
                        "area": r.mask.popcount(),
                        "object_type": r.object_type,
                    }
                    for r in regions
                ]
            }

    @app.post("/sessions/{session_id}/infer")
    def infer(session_id: str):
        with store.lock(session_id):
            state = _load(session_id)
            if state.sketch_png is None:
                raise ConflictError("upload a sketch before running inference")
            regions = state.regions(config.canvas_size)
            if not regions:
                raise ConflictError("the sketch has no colored regions to describe")
            schema = skeleton([r.region_id for r in regions])
            sample_cfg = SampleConfig(
                k=config.sample_k, rng_seed=derive_seed(state.seed, "lexicon")
            )
            names: list[str] = []
            for r in regions:
                name = r.object_type or ""
                if state.space:
                    try:
                        name = state.space.single_for(r.region_id).object_type or name
                    except KeyError:
                        pass
                if name:
                    names.append(name)
            attr_samples: list[str] = []
            for name in names:
                attr_samples.extend(sample_attributes(lexicon, name, sample_cfg))
            rel_samples = sample_relationships(lexicon, names, sample_cfg)
            # legend rebuilt from the extracted regions so it is complete even
            # when the uploaded sidecar named only some colors
            effective_legend = {
                r.color: LegendEntry(region_id=r.region_id, object_type=r.object_type)
                for r in regions
            }
            request = render_template(
                schema,
                effective_legend,
                state.sketch_png,
                attributes=attr_samples,
                relationships=rel_samples,
            )
            completion = infer_space(request, backends.chat, regions, config)
            if not completion.ok:
                raise CompletionParseError(
                    completion.error or "inference reply was unusable",
                    raw_text=completion.raw_text,
                )
            merged = (
                merge_user_first(state.space, completion.space)
                if state.space
                else completion.space
            )
            state = replace(state, space=merged).touched()
            store.save(state)
            return {
                "space": to_document(merged),
                "violations": [
                    {"region_id": v.region_id, "field": v.field, "message": v.message}
                    for v in completion.violations
                ],
            }

    @app.put("/sessions/{session_id}/space")
    def put_space(session_id: str, body: SpaceBody):
        with store.lock(session_id):
            state = _load(session_id)
            space = from_document(body.space)
            regions = state.regions(config.canvas_size) if state.sketch_png else None
            violations = validate(space, regions)
            if violations:
                raise ValidationError("space failed validation", violations=violations)
            state = replace(state, space=space).touched()
            store.save(state)
            return {"violations": []}

    @app.post("/sessions/{session_id}/regions/{region_id}/candidates")
    def make_candidates(session_id: str, region_id: str):
        with store.lock(session_id):
            state = _load(session_id)
            region = _region(state, region_id)
            space = _space_or_conflict(state)
            single = space.single_for(region_id)
            kind = classify(single.object_type, default_categories(), backends.embedding)
            if kind != "thing":
                raise ConflictError(
                    f"region {region_id!r} is classified as stuff; only thing regions "
                    "get shape candidates"
                )
            prompt = flatten_region(single, space.overall)
            version = state.rounds[region_id].version + 1 if region_id in state.rounds else 1
            candidates = generate_candidates(
                region, prompt, backends, state.seed, version=version, config=config
            )
            rnd = CandidateRound(
                region_id=region_id,
                version=version,
                prompt=prompt,
                candidates=tuple(candidates),
            )
            state = replace(state, rounds={**state.rounds, region_id: rnd}).touched()
            store.save(state)
            return {
                "version": version,
                "candidates": [
                    {
                        "index": i,
                        "iou": c.iou,
                        "clip_score": c.clip_score,
                        "combined": c.combined,
                        "flagged": c.flagged,
                        "image_png_b64": _b64(c.image_png),
                    }
                    for i, c in enumerate(rnd.candidates)
                ],
            }

    @app.post("/sessions/{session_id}/regions/{region_id}/candidates/{index}/select")
    def select(session_id: str, region_id: str, index: int, body: SelectBody):
        with store.lock(session_id):
            state = _load(session_id)
            region = _region(state, region_id)
            if region_id not in state.rounds:
                raise ConflictError(f"region {region_id!r} has no candidate round yet")
            placement = select_candidate(
                state.rounds[region_id], region, index, expected_version=body.version
            )
            state = replace(
                state, placements={**state.placements, region_id: placement}
            ).touched()
            store.save(state)
            return _placement_doc(placement)

    @app.patch("/sessions/{session_id}/regions/{region_id}/placement")
    def patch_placement(session_id: str, region_id: str, body: PlacementBody):
        with store.lock(session_id):
            state = _load(session_id)
            if region_id not in state.placements:
                raise KeyError(f"no placement for region {region_id!r}")
            t = AffineTransform(dx=body.dx, dy=body.dy, scale=body.scale)
            placement = adjust_placement(
                state.placements[region_id], t, config.canvas_size
            )
            state = replace(
                state, placements={**state.placements, region_id: placement}
            ).touched()
            store.save(state)
            return _placement_doc(placement)

    @app.post("/sessions/{session_id}/generate")
    def generate(session_id: str, body: GenerateBody):
        with store.lock(session_id):
            state = _load(session_id)
            space = _space_or_conflict(state)
            regions = state.regions(config.canvas_size)
            seed = body.seed if body.seed is not None else state.seed
            request = assemble_request(
                regions,
                space,
                state.placements,
                backends,
                seed=seed,
                samples=body.samples,
                config=config,
            )
            results = run_generation(request, backends.diffusion)
            state = replace(state, request=request, results=tuple(results)).touched()
            store.save(state)
            return {
                "results": [
                    {
                        "index": r.index,
                        "seed": r.seed,
                        "image_png_b64": _b64(r.image_png) if r.image_png else None,
                        "error": r.error,
                    }
                    for r in results
                ]
            }

    @app.get("/sessions/{session_id}/results")
    def results(session_id: str):
        state = _load(session_id)
        return {
            "results": [
                {
                    "index": r.index,
                    "seed": r.seed,
                    "image_png_b64": _b64(r.image_png) if r.image_png else None,
                    "error": r.error,
                }
                for r in state.results
            ]
        }

    @app.get("/sessions/{session_id}/request")
    def get_request(session_id: str):
        state = _load(session_id)
        if state.request is None:
            raise KeyError("no generation request assembled yet")
        return request_to_document(state.request)

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
