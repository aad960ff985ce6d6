"""On-disk session state.

One directory per session: a manifest document plus artifact files (sketch,
candidate images and masks, results, the assembled request). Artifacts are
written before the manifest and the manifest lands via temp-file rename, so
a crash leaves either the old session or the new one, never a torn state.
"""

from __future__ import annotations

import hashlib
import json
import os
import secrets
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .errors import InvalidArgumentError
from .masks import AffineTransform, Region, RegionSketch, extract_regions
from .palette import Legend, legend_from_json, legend_to_json
from .pipeline import (
    Candidate,
    CandidateRound,
    GenerationRequest,
    ObjectPlacement,
    SampleResult,
    request_from_document,
    request_to_document,
)
from .pngio import decode_mask, decode_rgb, encode_mask
from .seeds import MAX_SEED
from .semantic import SemanticSpace, from_document, to_document


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class SessionState:
    session_id: str
    seed: int
    created_at: str
    updated_at: str
    sketch_png: bytes | None = None
    legend: Legend = field(default_factory=dict)
    space: SemanticSpace | None = None
    rounds: dict[str, CandidateRound] = field(default_factory=dict)
    placements: dict[str, ObjectPlacement] = field(default_factory=dict)
    results: tuple[SampleResult, ...] = ()
    request: GenerationRequest | None = None

    def regions(self, canvas: int) -> list[Region]:
        if self.sketch_png is None:
            return []
        arr = decode_rgb(self.sketch_png)
        h, w = arr.shape[:2]
        if (w, h) != (canvas, canvas):
            raise InvalidArgumentError(
                f"sketch is {w}x{h}, expected {canvas}x{canvas}"
            )
        sketch = RegionSketch(width=w, height=h, pixels=arr, legend=self.legend)
        return extract_regions(sketch)

    def touched(self) -> "SessionState":
        return replace(self, updated_at=_now())


class SessionStore:
    """Directory-backed store. Loads are pure reads; saves are atomic at the
    manifest level. Callers serialize writes per session via lock()."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def _dir(self, session_id: str) -> Path:
        if not session_id.isalnum():
            raise KeyError(session_id)
        return self.root / session_id

    def create(self, seed: int | None = None) -> SessionState:
        session_id = secrets.token_hex(8)
        if seed is None:
            seed = int.from_bytes(os.urandom(8), "big") & MAX_SEED
        now = _now()
        state = SessionState(session_id=session_id, seed=seed, created_at=now, updated_at=now)
        self.save(state)
        return state

    def exists(self, session_id: str) -> bool:
        try:
            return (self._dir(session_id) / "manifest.json").is_file()
        except KeyError:
            return False

    def list_ids(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(
            p.name for p in self.root.iterdir() if (p / "manifest.json").is_file()
        )

    def manifest_hash(self, session_id: str) -> str:
        data = (self._dir(session_id) / "manifest.json").read_bytes()
        return hashlib.sha256(data).hexdigest()

    # -- persistence ------------------------------------------------------

    def save(self, state: SessionState) -> None:
        base = self._dir(state.session_id)
        base.mkdir(parents=True, exist_ok=True)
        manifest = self._write_artifacts(base, state)
        payload = json.dumps(manifest, sort_keys=True, indent=1).encode("utf-8")
        tmp = base / "manifest.json.tmp"
        tmp.write_bytes(payload)
        os.replace(tmp, base / "manifest.json")

    def load(self, session_id: str) -> SessionState:
        base = self._dir(session_id)
        path = base / "manifest.json"
        if not path.is_file():
            raise KeyError(session_id)
        manifest = json.loads(path.read_text("utf-8"))
        return self._from_manifest(base, manifest)

    def _blob(self, base: Path, rel: str, data: bytes) -> str:
        path = base / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if not path.is_file() or path.read_bytes() != data:
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        return rel

    def _candidate_doc(self, base: Path, prefix: str, c: Candidate) -> dict:
        return {
            "image": self._blob(base, f"{prefix}_image.png", c.image_png),
            "mask": self._blob(base, f"{prefix}_mask.png", encode_mask(c.extracted_mask)),
            "iou": c.iou,
            "clip_score": c.clip_score,
            "clip_norm": c.clip_norm,
            "combined": c.combined,
            "seed": c.seed,
            "batch_index": c.batch_index,
            "flagged": c.flagged,
        }

    def _candidate_from(self, base: Path, doc: dict) -> Candidate:
        return Candidate(
            image_png=(base / doc["image"]).read_bytes(),
            extracted_mask=decode_mask((base / doc["mask"]).read_bytes()),
            iou=doc["iou"],
            clip_score=doc["clip_score"],
            clip_norm=doc["clip_norm"],
            combined=doc["combined"],
            seed=doc["seed"],
            batch_index=doc["batch_index"],
            flagged=doc.get("flagged", False),
        )

    def _write_artifacts(self, base: Path, state: SessionState) -> dict:
        manifest: dict = {
            "session_id": state.session_id,
            "seed": state.seed,
            "created_at": state.created_at,
            "updated_at": state.updated_at,
            "sketch": None,
            "legend": legend_to_json(state.legend),
            "space": to_document(state.space) if state.space else None,
            "rounds": {},
            "placements": {},
            "results": [],
            "request": None,
        }
        if state.sketch_png is not None:
            manifest["sketch"] = self._blob(base, "sketch.png", state.sketch_png)
        for rid, rnd in sorted(state.rounds.items()):
            manifest["rounds"][rid] = {
                "version": rnd.version,
                "prompt": rnd.prompt,
                "candidates": [
                    self._candidate_doc(base, f"candidates/{rid}/v{rnd.version}_{i}", c)
                    for i, c in enumerate(rnd.candidates)
                ],
            }
        for rid, p in sorted(state.placements.items()):
            manifest["placements"][rid] = {
                "chosen": self._candidate_doc(base, f"placements/{rid}", p.chosen),
                "dx": p.transform.dx,
                "dy": p.transform.dy,
                "scale": p.transform.scale,
                "z": p.z,
                "version": p.version,
                "clipped": p.clipped,
            }
        for r in state.results:
            doc = {"index": r.index, "seed": r.seed, "image": None, "error": r.error}
            if r.image_png is not None:
                doc["image"] = self._blob(base, f"results/{r.index}.png", r.image_png)
            manifest["results"].append(doc)
        if state.request is not None:
            data = json.dumps(request_to_document(state.request), sort_keys=True).encode("utf-8")
            manifest["request"] = self._blob(base, "request.json", data)
        return manifest

    def _from_manifest(self, base: Path, manifest: dict) -> SessionState:
        sketch = None
        if manifest.get("sketch"):
            sketch = (base / manifest["sketch"]).read_bytes()
        rounds = {}
        for rid, doc in manifest.get("rounds", {}).items():
            rounds[rid] = CandidateRound(
                region_id=rid,
                version=doc["version"],
                prompt=doc["prompt"],
                candidates=tuple(self._candidate_from(base, c) for c in doc["candidates"]),
            )
        placements = {}
        for rid, doc in manifest.get("placements", {}).items():
            placements[rid] = ObjectPlacement(
                region_id=rid,
                chosen=self._candidate_from(base, doc["chosen"]),
                transform=AffineTransform(dx=doc["dx"], dy=doc["dy"], scale=doc["scale"]),
                z=doc["z"],
                version=doc["version"],
                clipped=doc.get("clipped", False),
            )
        results = []
        for doc in manifest.get("results", []):
            image = (base / doc["image"]).read_bytes() if doc.get("image") else None
            results.append(
                SampleResult(
                    index=doc["index"], seed=doc["seed"], image_png=image, error=doc.get("error")
                )
            )
        request = None
        if manifest.get("request"):
            request = request_from_document(
                json.loads((base / manifest["request"]).read_text("utf-8"))
            )
        return SessionState(
            session_id=manifest["session_id"],
            seed=manifest["seed"],
            created_at=manifest["created_at"],
            updated_at=manifest["updated_at"],
            sketch_png=sketch,
            legend=legend_from_json(manifest.get("legend") or {}),
            space=from_document(manifest["space"]) if manifest.get("space") else None,
            rounds=rounds,
            placements=placements,
            results=tuple(results),
            request=request,
        )
