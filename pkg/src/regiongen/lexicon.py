"""Attribute/relationship lexicon built from scene-description datasets.

Ingests newline-delimited records of the form

    name <TAB> kind <TAB> phrase        (kind is "attr" or "rel")

aggregating repeated records into frequency counts. Object names key the
dictionaries; grounding examples for prompting are sampled from the values.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError

SNAPSHOT_MAGIC = "regiongen-lexicon v1"

_KINDS = ("attr", "rel")


@dataclass(frozen=True)
class SampleConfig:
    k: int = 10
    rng_seed: int = 0
    frequency_weighted: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("sample count k must be >= 1")


@dataclass
class Lexicon:
    """name -> [(phrase, count), ...] for attributes and relationships.

    Names are lowercased and trimmed; counts are >= 1; a phrase appears at
    most once per name. Read-only after ingest.
    """

    attributes: dict[str, dict[str, int]] = field(default_factory=dict)
    relationships: dict[str, dict[str, int]] = field(default_factory=dict)

    def _table(self, kind: str) -> dict[str, dict[str, int]]:
        return self.attributes if kind == "attr" else self.relationships

    def add(self, name: str, kind: str, phrase: str, count: int = 1) -> None:
        if kind not in _KINDS:
            raise FormatError(f"unknown record kind {kind!r}")
        name = name.strip().lower()
        phrase = phrase.strip()
        if not name or not phrase:
            raise FormatError("record name and phrase must be nonempty")
        if count < 1:
            raise FormatError("record count must be >= 1")
        table = self._table(kind)
        bucket = table.setdefault(name, {})
        bucket[phrase] = bucket.get(phrase, 0) + count

    def attribute_count(self, name: str, phrase: str) -> int:
        return self.attributes.get(name.lower(), {}).get(phrase, 0)

    def relationship_count(self, name: str, phrase: str) -> int:
        return self.relationships.get(name.lower(), {}).get(phrase, 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Lexicon):
            return NotImplemented
        return self.attributes == other.attributes and self.relationships == other.relationships


def ingest(source: str | Path) -> Lexicon:
    """Build a lexicon from a TSV fixture file.

    Malformed lines raise FormatError with their line number; an empty file
    yields an empty lexicon. Re-ingesting the same file gives an equal
    lexicon, and record order does not matter.
    """
    lex = Lexicon()
    with open(source, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(
                    f"{source}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
                )
            name, kind, phrase = parts
            if kind not in _KINDS:
                raise FormatError(f"{source}:{lineno}: unknown kind {kind!r}")
            try:
                lex.add(name, kind, phrase)
            except FormatError as exc:
                raise FormatError(f"{source}:{lineno}: {exc}") from exc
    return lex


def _draw(pool: dict[str, int], cfg: SampleConfig) -> list[str]:
    phrases = sorted(pool)
    k = min(cfg.k, len(phrases))
    if k == 0:
        return []
    rng = random.Random(cfg.rng_seed)
    if not cfg.frequency_weighted:
        return rng.sample(phrases, k)
    # weighted draws without replacement
    remaining = list(phrases)
    weights = [pool[p] for p in remaining]
    chosen: list[str] = []
    for _ in range(k):
        total = sum(weights)
        tick = rng.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if tick < acc:
                chosen.append(remaining.pop(i))
                weights.pop(i)
                break
    return chosen


def sample_attributes(lex: Lexicon, name: str, cfg: SampleConfig) -> list[str]:
    """Up to k distinct attribute phrases for one object name, drawn without
    replacement; deterministic per seed; unknown names yield []."""
    return _draw(lex.attributes.get(name.strip().lower(), {}), cfg)


def sample_relationships(lex: Lexicon, names: list[str], cfg: SampleConfig) -> list[str]:
    """Up to k distinct relationship phrases pooled across the given names."""
    pool: dict[str, int] = {}
    for name in names:
        for phrase, count in lex.relationships.get(name.strip().lower(), {}).items():
            pool[phrase] = pool.get(phrase, 0) + count
    return _draw(pool, cfg)


def save_snapshot(lex: Lexicon, path: str | Path) -> None:
    """Write the versioned text snapshot: magic header, then one
    name/kind/phrase/count record per line."""
    lines = [SNAPSHOT_MAGIC]
    for kind, table in (("attr", lex.attributes), ("rel", lex.relationships)):
        for name in sorted(table):
            for phrase in sorted(table[name]):
                lines.append(f"{name}\t{kind}\t{phrase}\t{table[name][phrase]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_snapshot(path: str | Path) -> Lexicon:
    lex = Lexicon()
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != SNAPSHOT_MAGIC:
            raise FormatError(f"{path}: not a lexicon snapshot (bad magic header)")
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            name, kind, phrase, count = parts
            try:
                lex.add(name, kind, phrase, count=int(count))
            except (ValueError, FormatError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return lex
