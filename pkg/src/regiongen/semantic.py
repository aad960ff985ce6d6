"""Structured prompt model: per-region, cross-region, and overall dimensions.

The schema field names (type, attribute, state, direction, relationship,
lighting, camera, style) are shared verbatim with the chat template and the
completion parser, so the three stay in lockstep by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import ValidationError
from .palette import BACKGROUND_REGION_ID


@dataclass(frozen=True)
class SingleObjectPrompt:
    region_id: str
    object_type: str = ""
    attributes: tuple[str, ...] = ()
    state: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "state", tuple(self.state))

    @property
    def is_background(self) -> bool:
        return self.region_id == BACKGROUND_REGION_ID


@dataclass(frozen=True)
class CrossObjectPrompt:
    subject_id: str
    object_id: str
    direction: str = ""
    relationship: str = ""


@dataclass(frozen=True)
class OverallPrompt:
    lighting: str = ""
    camera: str = ""
    style: str = ""

    def phrases(self) -> list[str]:
        return [p for p in (self.lighting, self.camera, self.style) if p]


@dataclass(frozen=True)
class Violation:
    region_id: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.region_id}.{self.field}: {self.message}"


@dataclass(frozen=True)
class SemanticSpace:
    singles: tuple[SingleObjectPrompt, ...] = ()
    crosses: tuple[CrossObjectPrompt, ...] = ()
    overall: OverallPrompt = OverallPrompt()

    def __post_init__(self):
        object.__setattr__(self, "singles", tuple(self.singles))
        object.__setattr__(self, "crosses", tuple(self.crosses))

    def single_for(self, region_id: str) -> SingleObjectPrompt | None:
        for s in self.singles:
            if s.region_id == region_id:
                return s
        return None

    def region_ids(self) -> list[str]:
        return [s.region_id for s in self.singles if not s.is_background]


def skeleton(region_ids: list[str]) -> SemanticSpace:
    """Empty-valued space with one entry per region plus the background."""
    singles = [SingleObjectPrompt(region_id=r) for r in region_ids]
    singles.append(SingleObjectPrompt(region_id=BACKGROUND_REGION_ID))
    return SemanticSpace(singles=tuple(singles))


def _clean(parts: list[str]) -> list[str]:
    return [p.strip() for p in parts if p and p.strip()]


def flatten_region(s: SingleObjectPrompt, overall: OverallPrompt) -> str:
    """Comma-join a region's phrases: type, attributes, state, then the
    overall phrases. Labels never leak into the output; nor do empty
    segments or duplicated commas."""
    if not s.object_type.strip() and not s.is_background:
        raise ValidationError(f"region {s.region_id} has no object type")
    parts = _clean([s.object_type, *s.attributes, *s.state, *overall.phrases()])
    return ", ".join(parts)


def relationship_prompt(c: CrossObjectPrompt, space: SemanticSpace) -> str:
    """Phrase carrying a relation's conditioning text.

    Always contains both object types; the direction phrase, when present,
    is appended so it rides along with the relation.
    """
    subject = space.single_for(c.subject_id)
    obj = space.single_for(c.object_id)
    if subject is None:
        raise ValidationError(f"relation references unknown region {c.subject_id}")
    if obj is None:
        raise ValidationError(f"relation references unknown region {c.object_id}")
    rel = c.relationship.strip()
    s_type = subject.object_type.strip()
    o_type = obj.object_type.strip()
    if s_type and s_type in rel and o_type and o_type in rel:
        phrase = rel
    else:
        phrase = " ".join(_clean([s_type, rel, o_type]))
    if c.direction.strip():
        phrase = f"{phrase}, {c.direction.strip()}"
    return phrase


def validate(space: SemanticSpace, regions=None) -> list[Violation]:
    """Structural soundness check; an empty result means every region can
    be flattened without error.

    regions, when given, is the sketch's region set (ids or Region values);
    the space must then cover exactly those regions plus background."""
    violations: list[Violation] = []
    known = {s.region_id for s in space.singles}
    seen: set[str] = set()
    backgrounds = 0
    for s in space.singles:
        if s.region_id in seen:
            violations.append(Violation(s.region_id, "region", "duplicate region entry"))
        seen.add(s.region_id)
        if s.is_background:
            backgrounds += 1
            if s.state:
                violations.append(
                    Violation(s.region_id, "state", "background carries no state")
                )
            continue
        if not s.object_type.strip():
            violations.append(Violation(s.region_id, "type", "missing object type"))
    if backgrounds == 0:
        violations.append(Violation(BACKGROUND_REGION_ID, "region", "missing background entry"))
    elif backgrounds > 1:
        violations.append(
            Violation(BACKGROUND_REGION_ID, "region", "more than one background entry")
        )
    if regions is not None:
        expected = {r if isinstance(r, str) else r.region_id for r in regions}
        for rid in sorted(expected - known):
            violations.append(Violation(rid, "region", "sketch region has no prompt entry"))
        for s in space.singles:
            if not s.is_background and s.region_id not in expected:
                violations.append(
                    Violation(s.region_id, "region", "prompt entry has no sketch region")
                )
    for c in space.crosses:
        if c.subject_id == c.object_id:
            violations.append(
                Violation(c.subject_id, "relationship", "relation links a region to itself")
            )
        for rid in (c.subject_id, c.object_id):
            if rid not in known:
                violations.append(
                    Violation(rid, "relationship", "relation references unknown region")
                )
    return violations


# ---------------------------------------------------------------------------
# Canonical serialization (shared by template, parser, and persistence)
# ---------------------------------------------------------------------------


def to_document(space: SemanticSpace) -> dict:
    return {
        "objects": [
            {
                "region": s.region_id,
                "type": s.object_type,
                "attribute": list(s.attributes),
                "state": list(s.state),
            }
            for s in space.singles
        ],
        "relations": [
            {
                "subject": c.subject_id,
                "object": c.object_id,
                "direction": c.direction,
                "relationship": c.relationship,
            }
            for c in space.crosses
        ],
        "overall": {
            "lighting": space.overall.lighting,
            "camera": space.overall.camera,
            "style": space.overall.style,
        },
    }


def _phrase_list(value) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return (value,) if value.strip() else ()
    return tuple(str(v) for v in value if str(v).strip())


def from_document(data: dict) -> SemanticSpace:
    if not isinstance(data, dict) or "objects" not in data:
        raise ValidationError("document has no 'objects' section")
    singles = []
    for obj in data.get("objects", []):
        singles.append(
            SingleObjectPrompt(
                region_id=str(obj.get("region", "")),
                object_type=str(obj.get("type", "") or ""),
                attributes=_phrase_list(obj.get("attribute")),
                state=_phrase_list(obj.get("state")),
            )
        )
    crosses = []
    for rel in data.get("relations", []):
        crosses.append(
            CrossObjectPrompt(
                subject_id=str(rel.get("subject", "")),
                object_id=str(rel.get("object", "")),
                direction=str(rel.get("direction", "") or ""),
                relationship=str(rel.get("relationship", "") or ""),
            )
        )
    overall_doc = data.get("overall") or {}
    overall = OverallPrompt(
        lighting=str(overall_doc.get("lighting", "") or ""),
        camera=str(overall_doc.get("camera", "") or ""),
        style=str(overall_doc.get("style", "") or ""),
    )
    return SemanticSpace(singles=tuple(singles), crosses=tuple(crosses), overall=overall)


def dumps(space: SemanticSpace, indent: int | None = 2) -> str:
    return json.dumps(to_document(space), indent=indent)


def loads(text: str) -> SemanticSpace:
    try:
        return from_document(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not a valid schema document: {exc}") from exc


def merge_user_first(user: SemanticSpace, inferred: SemanticSpace) -> SemanticSpace:
    """Merge an inferred space into the user's: user-filled fields win,
    inferred values fill only the blanks."""
    singles = []
    for u in user.singles:
        i = inferred.single_for(u.region_id)
        if i is None:
            singles.append(u)
            continue
        singles.append(
            SingleObjectPrompt(
                region_id=u.region_id,
                object_type=u.object_type if u.object_type.strip() else i.object_type,
                attributes=u.attributes if u.attributes else i.attributes,
                state=u.state if u.state else i.state,
            )
        )
    known = {s.region_id for s in user.singles}
    for i in inferred.singles:
        if i.region_id not in known:
            singles.append(i)
    crosses = user.crosses if user.crosses else inferred.crosses
    overall = OverallPrompt(
        lighting=user.overall.lighting or inferred.overall.lighting,
        camera=user.overall.camera or inferred.overall.camera,
        style=user.overall.style or inferred.overall.style,
    )
    return SemanticSpace(singles=tuple(singles), crosses=crosses, overall=overall)
