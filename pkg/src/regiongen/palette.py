"""Fixed 12-color sketch palette and legend handling.

Sketch rasters may contain only these colors plus white background.
Palette order doubles as the layer (z) order used when placed objects
overlap: later colors occlude earlier ones.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

WHITE = "#ffffff"

# (hex, canonical name), index = z layer
PALETTE: tuple[tuple[str, str], ...] = (
    ("#e6194b", "red"),
    ("#3cb44b", "green"),
    ("#4363d8", "blue"),
    ("#ffe119", "yellow"),
    ("#f58231", "orange"),
    ("#911eb4", "purple"),
    ("#42d4f4", "cyan"),
    ("#f032e6", "magenta"),
    ("#9a6324", "brown"),
    ("#fabed4", "pink"),
    ("#469990", "teal"),
    ("#808000", "olive"),
)

BACKGROUND_REGION_ID = "background"

_HEX_TO_INDEX = {hex_: i for i, (hex_, _) in enumerate(PALETTE)}
_NAME_TO_INDEX = {name: i for i, (_, name) in enumerate(PALETTE)}


def hex_to_rgb(hex_color: str) -> tuple[int, int, int]:
    h = hex_color.lstrip("#")
    return int(h[0:2], 16), int(h[2:4], 16), int(h[4:6], 16)


def rgb_to_hex(rgb: tuple[int, int, int]) -> str:
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def palette_index(hex_color: str) -> int:
    """Index of a palette color, raising KeyError for unknown colors."""
    return _HEX_TO_INDEX[hex_color.lower()]


def color_name(hex_color: str) -> str:
    return PALETTE[palette_index(hex_color)][1]


def palette_rgb_array() -> np.ndarray:
    """(12, 3) uint8 array of palette colors in z order."""
    return np.array([hex_to_rgb(h) for h, _ in PALETTE], dtype=np.uint8)


@dataclass(frozen=True)
class LegendEntry:
    region_id: str
    object_type: str | None = None


# legend: hex color -> entry; colors present in the raster but absent from
# the legend fall back to (color name, no type).
Legend = dict[str, LegendEntry]


_REGION_ID_RE = re.compile(r"^[a-zA-Z0-9_-]{1,64}$")


def _checked_id(region_id: str) -> str:
    # ids end up in artifact paths and wire documents, keep them plain
    if not _REGION_ID_RE.match(region_id):
        raise FormatError(f"region id {region_id!r} must be 1-64 chars of [a-zA-Z0-9_-]")
    return region_id


def legend_from_json(data: dict) -> Legend:
    """Parse the legend sidecar document: {"#rrggbb": {"region_id": ..., "type": ...}}."""
    legend: Legend = {}
    for raw_color, entry in data.items():
        color = raw_color.lower()
        if color not in _HEX_TO_INDEX:
            raise FormatError(f"legend color {raw_color} is not in the palette")
        if isinstance(entry, str):
            legend[color] = LegendEntry(region_id=_checked_id(entry))
        else:
            legend[color] = LegendEntry(
                region_id=_checked_id(str(entry["region_id"])),
                object_type=entry.get("type") or None,
            )
    return legend


def legend_to_json(legend: Legend) -> dict:
    out: dict[str, dict] = {}
    for color, entry in legend.items():
        doc: dict = {"region_id": entry.region_id}
        if entry.object_type:
            doc["type"] = entry.object_type
        out[color] = doc
    return out
