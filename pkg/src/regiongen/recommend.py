"""Sketch-conditioned prompt recommendation.

Renders the multimodal inference prompt (instruction text + region legend +
answer schema + worked examples + sampled lexicon phrases), sends it with
the sketch to the chat backend, and parses the reply into a SemanticSpace.
The instruction wording is part of the engine's behavioral contract and is
embedded verbatim; tests pin every sentence.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .config import DEFAULT_CONFIG, EngineConfig
from .errors import CompletionParseError, FormatError, ValidationError
from .masks import Region
from .palette import BACKGROUND_REGION_ID, Legend, color_name
from .semantic import SemanticSpace, Violation, from_document, to_document, validate

PLACEHOLDERS = (
    "input_color_mask",
    "format_example",
    "few_shot",
    "attributes",
    "relationships",
)

DEFAULT_TEMPLATE_BODY = """\
Here is a sketch of an image.
{input_color_mask}, while the rest of the white space is the background.
I need you to infer details of the image based on the given sketch.
The details should include the possible background likely to be present with the {input_color_mask}, the attribute of each object (like wearing, texture, color etc.), the state (including action, posture, etc.) of each object, the direction of each object and the relationships between objects.

You should first analyze the mask carefully, considering the size, location, and relative position of each object mask. Ensure that specific actions are analyzed based on the mask, and infer each aspect with a reasoning process before providing the final output.
The final output format should be: {format_example}, and you should refer to the example: {few_shot}. You are going to complete the "" in each item, you need to complete them in multiple short phrases based on your above reasoning.

The state and relationship should be as detailed as possible while ensuring they align with the mask, formatted as: objectA action/spatial relation objectB, with both objectA and objectB included.
You should properly refer to some examples of attributes of object {attributes} and relationships {relationships}.
Do not include words like 'or', 'possibly' in your final output, there should no ambiguity in your output.
Make sure all aspects of given mask is filled.
"""

FORMAT_EXAMPLE = {
    "objects": [{"region": "", "type": "", "attribute": "", "state": ""}],
    "relations": [{"subject": "", "object": "", "direction": "", "relationship": ""}],
    "overall": {"lighting": "", "camera": "", "style": ""},
}


@dataclass(frozen=True)
class PromptTemplate:
    body: str = DEFAULT_TEMPLATE_BODY

    def __post_init__(self):
        for name in PLACEHOLDERS:
            if "{" + name + "}" not in self.body:
                raise FormatError(f"template body is missing placeholder {{{name}}}")

    def render(self, values: dict[str, str]) -> str:
        # str.format would choke on literal braces in the JSON substitutions,
        # so placeholders are replaced textually; each may occur repeatedly.
        text = self.body
        for name in PLACEHOLDERS:
            text = text.replace("{" + name + "}", values[name])
        leftover = re.search(r"\{[a-z_]+\}", text)
        if leftover:
            raise FormatError(f"unresolved placeholder {leftover.group(0)} in rendered prompt")
        return text


@dataclass(frozen=True)
class FewShotExample:
    """A worked example: legend phrased differently from the live legend so
    downstream consumers can tell them apart."""

    legend_text: str
    document: dict

    def render(self) -> str:
        return (
            f"Example input: {self.legend_text}\n"
            f"Example output: {json.dumps(self.document, sort_keys=True)}"
        )


TWO_OBJECT_EXAMPLE = FewShotExample(
    legend_text="the red region shows a girl; the green region shows a cat",
    document={
        "objects": [
            {
                "region": "red",
                "type": "girl",
                "attribute": "long brown hair, yellow summer dress",
                "state": "kneeling down, reaching out one hand",
            },
            {
                "region": "green",
                "type": "cat",
                "attribute": "fluffy white fur, small round face",
                "state": "sitting on the grass, looking up",
            },
            {
                "region": "background",
                "type": "meadow",
                "attribute": "soft green grass, scattered daisies",
                "state": "",
            },
        ],
        "relations": [
            {
                "subject": "red",
                "object": "green",
                "direction": "facing each other",
                "relationship": "girl reaching toward cat",
            }
        ],
        "overall": {
            "lighting": "warm afternoon sunlight",
            "camera": "eye level medium shot",
            "style": "soft watercolor illustration",
        },
    },
)

FOUR_OBJECT_EXAMPLE = FewShotExample(
    legend_text=(
        "the blue region shows a boy; the yellow region shows a dog; "
        "the purple region shows a kite; the cyan region shows a bench"
    ),
    document={
        "objects": [
            {
                "region": "blue",
                "type": "boy",
                "attribute": "striped t-shirt, short black hair",
                "state": "running forward, holding a string",
            },
            {
                "region": "yellow",
                "type": "dog",
                "attribute": "golden fur, red collar",
                "state": "running beside the boy, tongue out",
            },
            {
                "region": "purple",
                "type": "kite",
                "attribute": "diamond shaped, bright purple fabric",
                "state": "flying high, tail fluttering",
            },
            {
                "region": "cyan",
                "type": "bench",
                "attribute": "weathered wood, cast iron legs",
                "state": "standing empty",
            },
            {
                "region": "background",
                "type": "park",
                "attribute": "open lawn, distant trees",
                "state": "",
            },
        ],
        "relations": [
            {
                "subject": "blue",
                "object": "purple",
                "direction": "looking up",
                "relationship": "boy flying kite",
            },
            {
                "subject": "yellow",
                "object": "blue",
                "direction": "facing right",
                "relationship": "dog running beside boy",
            },
        ],
        "overall": {
            "lighting": "clear midday light",
            "camera": "low angle wide shot",
            "style": "vivid digital painting",
        },
    },
)

DEFAULT_FEW_SHOT = (TWO_OBJECT_EXAMPLE, FOUR_OBJECT_EXAMPLE)


@dataclass(frozen=True)
class InferenceRequest:
    rendered_text: str
    sketch_png: bytes
    legend: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Completion:
    raw_text: str
    space: SemanticSpace | None
    violations: tuple[Violation, ...] = ()
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.space is not None


def _article(noun: str) -> str:
    return "an" if noun[:1].lower() in "aeiou" else "a"


def _legend_sentences(legend: Legend) -> str:
    ordered = sorted(legend.items(), key=lambda kv: _palette_order(kv[0]))
    parts = []
    for hex_color, entry in ordered:
        name = color_name(hex_color)
        kind = (entry.object_type or "").strip() or "unlabeled object"
        parts.append(f"The {name} region is {_article(kind)} {kind}")
    return ". ".join(parts)


def _palette_order(hex_color: str) -> int:
    from .palette import palette_index

    return palette_index(hex_color)


def _phrase_list(phrases: list[str]) -> str:
    return "[" + ", ".join(f"'{p}'" for p in phrases) + "]"


def render_template(
    schema: SemanticSpace,
    legend: Legend,
    sketch_png: bytes,
    attributes: list[str] | None = None,
    relationships: list[str] | None = None,
    few_shot: tuple[FewShotExample, ...] = DEFAULT_FEW_SHOT,
    template: PromptTemplate | None = None,
) -> InferenceRequest:
    if not legend:
        raise ValidationError("legend must name at least one region")
    if not few_shot:
        raise ValidationError("at least one worked example is required")
    legend_ids = {entry.region_id for entry in legend.values()}
    schema_ids = set(schema.region_ids())
    if legend_ids != schema_ids:
        raise ValidationError(
            f"schema regions {sorted(schema_ids)} do not match legend regions {sorted(legend_ids)}"
        )
    template = template or PromptTemplate()
    values = {
        "input_color_mask": _legend_sentences(legend),
        "format_example": json.dumps(FORMAT_EXAMPLE, sort_keys=True),
        "few_shot": "\n".join(ex.render() for ex in few_shot),
        "attributes": _phrase_list(attributes or []),
        "relationships": _phrase_list(relationships or []),
    }
    return InferenceRequest(
        rendered_text=template.render(values),
        sketch_png=sketch_png,
        legend=dict(legend),
    )


_HEDGE_RE = re.compile(r"\b(or|possibly)\b", re.IGNORECASE)


def _json_blocks(text: str):
    """Yield top-level balanced {...} substrings, string-aware."""
    depth = 0
    start = -1
    in_string = False
    escape = False
    for i, ch in enumerate(text):
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    yield text[start : i + 1]


def _extract_document(raw: str) -> dict:
    best = None
    for block in _json_blocks(raw):
        try:
            data = json.loads(block)
        except json.JSONDecodeError:
            continue
        if isinstance(data, dict) and "objects" in data:
            best = data  # keep the last one; final output trails the reasoning
    if best is None:
        raise CompletionParseError("no schema document found in completion", raw_text=raw)
    return best


def _region_map(regions: list[Region] | None) -> dict[str, str]:
    mapping = {BACKGROUND_REGION_ID: BACKGROUND_REGION_ID}
    for r in regions or []:
        mapping[r.region_id.strip().lower()] = r.region_id
        mapping[color_name(r.color)] = r.region_id
    return mapping


def _hedge_violations(doc: dict) -> list[Violation]:
    found = []
    for obj in doc.get("objects", []):
        rid = str(obj.get("region", ""))
        for key in ("type", "attribute", "state"):
            value = str(obj.get(key, ""))
            if value and _HEDGE_RE.search(value):
                found.append(Violation(rid, key, f"ambiguous wording in {key!r}: {value!r}"))
    for rel in doc.get("relations", []):
        for key in ("direction", "relationship"):
            value = str(rel.get(key, ""))
            if value and _HEDGE_RE.search(value):
                found.append(
                    Violation(str(rel.get("subject", "")), key, f"ambiguous wording: {value!r}")
                )
    for key, value in (doc.get("overall") or {}).items():
        if value and _HEDGE_RE.search(str(value)):
            found.append(Violation("", key, f"ambiguous wording: {value!r}"))
    return found


def _completeness_violations(space: SemanticSpace) -> list[Violation]:
    # "all aspects filled": foreground objects need type, attribute and state
    found = []
    for s in space.singles:
        if s.is_background:
            if not s.object_type.strip():
                found.append(Violation(s.region_id, "type", "background type is empty"))
            continue
        if not s.object_type.strip():
            found.append(Violation(s.region_id, "type", "object type is empty"))
        if not s.attributes:
            found.append(Violation(s.region_id, "attribute", "no attributes given"))
        if not s.state:
            found.append(Violation(s.region_id, "state", "no state given"))
    return found


def parse_completion(raw: str, regions: list[Region] | None = None) -> Completion:
    """Pull the schema document out of the reply's surrounding prose.

    Hedged wording and unfilled aspects are recorded as violations without
    rejecting the completion; region references are resolved against the
    sketch regions when those are supplied (the model may answer in color
    names). Unresolvable references are dropped and reported.
    """
    doc = _extract_document(raw)
    violations = _hedge_violations(doc)
    mapping = _region_map(regions)
    if regions is not None:
        kept_objects = []
        for obj in doc.get("objects", []):
            key = str(obj.get("region", "")).strip().lower()
            if key in mapping:
                kept_objects.append({**obj, "region": mapping[key]})
            else:
                violations.append(
                    Violation(key, "region", f"completion names unknown region {key!r}")
                )
        kept_relations = []
        for rel in doc.get("relations", []):
            s = str(rel.get("subject", "")).strip().lower()
            o = str(rel.get("object", "")).strip().lower()
            if s in mapping and o in mapping:
                kept_relations.append({**rel, "subject": mapping[s], "object": mapping[o]})
            else:
                violations.append(
                    Violation(s, "relation", f"relation references unknown region {s!r}/{o!r}")
                )
        doc = {**doc, "objects": kept_objects, "relations": kept_relations}
    try:
        space = from_document(doc)
    except (ValidationError, ValueError, KeyError, TypeError) as exc:
        raise CompletionParseError(f"schema document malformed: {exc}", raw_text=raw) from exc
    structural = validate(space, regions)
    if structural:
        # treated like a parse failure so the caller's repair retry kicks in
        raise CompletionParseError(
            "completion violates schema structure: "
            + "; ".join(v.message for v in structural),
            raw_text=raw,
        )
    violations.extend(_completeness_violations(space))
    return Completion(raw_text=raw, space=space, violations=tuple(violations))


REPAIR_INSTRUCTION = (
    "Your previous reply could not be parsed. Reply again with only the JSON "
    'document in the required format, completing every "" value.'
)


def infer_space(
    request: InferenceRequest,
    chat,
    regions: list[Region] | None = None,
    config: EngineConfig = DEFAULT_CONFIG,
) -> Completion:
    """One chat round plus a single repair retry on unparseable output.

    Transport failures propagate as backend errors untouched; a second
    parse failure comes back as a failure report with the raw text kept."""
    from .backends.base import ChatRequest

    def ask(text: str) -> str:
        return chat.complete(
            ChatRequest(
                text=text,
                image_png=request.sketch_png,
                max_tokens=config.chat_max_tokens,
                temperature=config.chat_temperature,
            )
        )

    raw = ask(request.rendered_text)
    try:
        return parse_completion(raw, regions)
    except CompletionParseError:
        pass
    raw = ask(request.rendered_text + "\n\n" + REPAIR_INSTRUCTION)
    try:
        return parse_completion(raw, regions)
    except CompletionParseError as exc:
        return Completion(raw_text=raw, space=None, violations=(), error=str(exc))


def serialize_answer(space: SemanticSpace) -> str:
    """Render a space exactly as a well-behaved completion would."""
    return json.dumps(to_document(space), indent=2, sort_keys=True)
