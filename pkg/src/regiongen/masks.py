"""Raster-mask algebra, region extraction, affine placement, and edge anchoring.

Everything in this module is pure and deterministic: values are immutable
after construction and no operation touches shared state, so any number of
callers may use them concurrently.

Coordinate conventions: grids are numpy arrays of shape (height, width),
row-major, y down. Affine transforms scale about the canvas center and
translate afterwards; resampling is nearest-neighbor so binary masks stay
binary without thresholding ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InvalidArgumentError
from .palette import PALETTE, Legend, LegendEntry, color_name, palette_rgb_array, rgb_to_hex


def _as_bool_grid(bits: np.ndarray, width: int, height: int) -> np.ndarray:
    arr = np.asarray(bits, dtype=bool)
    if arr.shape != (height, width):
        raise InvalidArgumentError(
            f"bits shape {arr.shape} does not match (height={height}, width={width})"
        )
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RasterMask:
    """Binary pixel region on a fixed canvas."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidArgumentError("mask dimensions must be positive")
        object.__setattr__(self, "bits", _as_bool_grid(self.bits, self.width, self.height))

    @staticmethod
    def empty(width: int, height: int) -> "RasterMask":
        return RasterMask(width, height, np.zeros((height, width), dtype=bool))

    @staticmethod
    def full(width: int, height: int) -> "RasterMask":
        return RasterMask(width, height, np.ones((height, width), dtype=bool))

    @staticmethod
    def from_array(bits: np.ndarray) -> "RasterMask":
        arr = np.asarray(bits, dtype=bool)
        if arr.ndim != 2:
            raise InvalidArgumentError("mask array must be 2-dimensional")
        return RasterMask(arr.shape[1], arr.shape[0], arr)

    def popcount(self) -> int:
        return int(np.count_nonzero(self.bits))

    def is_empty(self) -> bool:
        return not self.bits.any()

    def centroid(self) -> tuple[float, float] | None:
        """(x, y) mean of set pixels, None for the empty mask."""
        ys, xs = np.nonzero(self.bits)
        if xs.size == 0:
            return None
        return float(xs.mean()), float(ys.mean())

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterMask):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.bits, other.bits))
        )

    def __hash__(self):
        return hash((self.width, self.height, self.bits.tobytes()))


@dataclass(frozen=True)
class GrayImage:
    """Row-major luminance raster with values in [0, 1]."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidArgumentError("image dimensions must be positive")
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != (self.height, self.width):
            raise InvalidArgumentError(
                f"values shape {arr.shape} does not match (height={self.height}, width={self.width})"
            )
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise InvalidArgumentError("luminance values must lie in [0, 1]")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @staticmethod
    def from_array(values: np.ndarray) -> "GrayImage":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise InvalidArgumentError("image array must be 2-dimensional")
        return GrayImage(arr.shape[1], arr.shape[0], arr)


# Edge maps share the binary-grid representation and invariants of masks.
EdgeMap = RasterMask


@dataclass(frozen=True)
class AffineTransform:
    """Scale about the canvas center, then translate by (dx, dy) pixels.

    scale must lie in (0, 16]; transformed masks are clipped to the canvas
    and never wrap.
    """

    dx: float = 0.0
    dy: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0):
            raise InvalidArgumentError(f"scale must be positive, got {self.scale}")
        if self.scale > 16:
            raise InvalidArgumentError(f"scale must be at most 16, got {self.scale}")

    def is_identity(self) -> bool:
        return self.dx == 0 and self.dy == 0 and self.scale == 1.0

    def compose(self, then: "AffineTransform") -> "AffineTransform":
        """Transform equal to applying self first and `then` second.

        Because scaling is about the fixed canvas center, composition stays
        affine: s = s1*s2, d = d2 + s2*d1.
        """
        return AffineTransform(
            dx=then.dx + then.scale * self.dx,
            dy=then.dy + then.scale * self.dy,
            scale=self.scale * then.scale,
        )


def _require_same_dims(a: RasterMask, b: RasterMask) -> None:
    if a.width != b.width or a.height != b.height:
        raise InvalidArgumentError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def iou(a: RasterMask, b: RasterMask) -> float:
    """Intersection over union in [0, 1]; 0 when both masks are empty."""
    _require_same_dims(a, b)
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 0.0
    return inter / union


def joint_mask(a: RasterMask, b: RasterMask) -> RasterMask:
    """Pixelwise union of two masks."""
    _require_same_dims(a, b)
    return RasterMask(a.width, a.height, a.bits | b.bits)


def mask_difference(a: RasterMask, b: RasterMask) -> RasterMask:
    """Pixels set in a and not in b."""
    _require_same_dims(a, b)
    return RasterMask(a.width, a.height, a.bits & ~b.bits)


def apply_transform(mask: RasterMask, t: AffineTransform) -> RasterMask:
    """Nearest-neighbor scale about the canvas center, then translate.

    The identity transform returns the input mask verbatim; anything moved
    off-canvas is clipped.
    """
    if t.is_identity():
        return mask
    h, w = mask.height, mask.width
    cx, cy = w / 2.0, h / 2.0
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    # inverse mapping: output pixel -> source pixel
    src_x = np.floor((xs - t.dx - cx) / t.scale + cx).astype(np.int64)
    src_y = np.floor((ys - t.dy - cy) / t.scale + cy).astype(np.int64)
    valid_x = (src_x >= 0) & (src_x < w)
    valid_y = (src_y >= 0) & (src_y < h)
    out = np.zeros((h, w), dtype=bool)
    if valid_x.any() and valid_y.any():
        gy = src_y[valid_y][:, None]
        gx = src_x[valid_x][None, :]
        sub = mask.bits[gy, gx]
        out[np.ix_(valid_y, valid_x)] = sub
    return RasterMask(w, h, out)


def resize_mask(mask: RasterMask, width: int, height: int) -> RasterMask:
    """Nearest-neighbor resample to a new canvas size."""
    if width <= 0 or height <= 0:
        raise InvalidArgumentError("target dimensions must be positive")
    if width == mask.width and height == mask.height:
        return mask
    src_x = (np.arange(width) * mask.width // width).astype(np.int64)
    src_y = (np.arange(height) * mask.height // height).astype(np.int64)
    return RasterMask(width, height, mask.bits[src_y[:, None], src_x[None, :]])


def downsample_majority(mask: RasterMask, width: int, height: int) -> RasterMask:
    """Area-majority downsample: a cell is set when >= 50% of its source
    pixels are set. Preserves thin regions better than nearest-neighbor."""
    if width <= 0 or height <= 0:
        raise InvalidArgumentError("target dimensions must be positive")
    if width == mask.width and height == mask.height:
        return mask
    y_edges = (np.arange(height + 1) * mask.height) // height
    x_edges = (np.arange(width + 1) * mask.width) // width
    # integral image makes arbitrary block sums O(1)
    integral = np.zeros((mask.height + 1, mask.width + 1), dtype=np.int64)
    np.cumsum(np.cumsum(mask.bits, axis=0), axis=1, out=integral[1:, 1:])
    y0, y1 = y_edges[:-1], y_edges[1:]
    x0, x1 = x_edges[:-1], x_edges[1:]
    sums = (
        integral[y1[:, None], x1[None, :]]
        - integral[y0[:, None], x1[None, :]]
        - integral[y1[:, None], x0[None, :]]
        + integral[y0[:, None], x0[None, :]]
    )
    areas = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return RasterMask(width, height, sums * 2 >= areas)


# ---------------------------------------------------------------------------
# Region extraction from color sketches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """One sketched object: all pixels of a single palette color."""

    region_id: str
    color: str
    palette_index: int
    object_type: str | None
    mask: RasterMask

    @property
    def z(self) -> int:
        return self.palette_index


@dataclass(frozen=True)
class RegionSketch:
    """RGB sketch raster plus the legend naming each color's region."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8
    legend: Legend

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.uint8)
        if arr.shape != (self.height, self.width, 3):
            raise InvalidArgumentError(
                f"pixels shape {arr.shape} does not match (height, width, 3)"
            )
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @staticmethod
    def blank(width: int, height: int, legend: Legend | None = None) -> "RegionSketch":
        px = np.full((height, width, 3), 255, dtype=np.uint8)
        return RegionSketch(width, height, px, legend or {})


def extract_regions(sketch: RegionSketch) -> list[Region]:
    """Split a sketch into one region per palette color present.

    Disconnected blobs of the same color merge into a single region (one
    color means one semantic object). Raises FormatError naming the first
    color that is neither white nor in the palette. Regions come back in
    palette (z) order.
    """
    palette = palette_rgb_array()
    px = sketch.pixels
    flat = px.reshape(-1, 3)
    # map every pixel to palette index, 12 = white, 13 = unknown
    codes = np.full(flat.shape[0], 13, dtype=np.int8)
    white = np.all(flat == 255, axis=1)
    codes[white] = 12
    for idx in range(len(PALETTE)):
        match = np.all(flat == palette[idx], axis=1)
        codes[match] = idx
    bad = np.nonzero(codes == 13)[0]
    if bad.size:
        r, g, b = (int(v) for v in flat[bad[0]])
        raise FormatError(f"sketch contains non-palette color {rgb_to_hex((r, g, b))}")
    codes = codes.reshape(sketch.height, sketch.width)

    regions: list[Region] = []
    for idx, (hex_color, name) in enumerate(PALETTE):
        bits = codes == idx
        if not bits.any():
            continue
        entry = sketch.legend.get(hex_color, LegendEntry(region_id=name))
        regions.append(
            Region(
                region_id=entry.region_id,
                color=hex_color,
                palette_index=idx,
                object_type=entry.object_type,
                mask=RasterMask(sketch.width, sketch.height, bits),
            )
        )
    return regions


def render_regions(regions: list[Region], width: int, height: int) -> np.ndarray:
    """Inverse of extract_regions: paint regions onto a white canvas."""
    px = np.full((height, width, 3), 255, dtype=np.uint8)
    palette = palette_rgb_array()
    for region in regions:
        px[region.mask.bits] = palette[region.palette_index]
    return px


def background_mask(regions: list[Region], width: int, height: int) -> RasterMask:
    """Complement of the union of all region masks."""
    covered = np.zeros((height, width), dtype=bool)
    for region in regions:
        covered |= region.mask.bits
    return RasterMask(width, height, ~covered)


# ---------------------------------------------------------------------------
# Canny edge detection
# ---------------------------------------------------------------------------

GAUSSIAN_SIZE = 5
GAUSSIAN_SIGMA = 1.4


def _gaussian_kernel_1d(size: int, sigma: float) -> np.ndarray:
    half = size // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    kernel = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _convolve_separable(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 2D convolution with edge-replicate padding."""
    half = kernel.size // 2
    padded = np.pad(values, ((0, 0), (half, half)), mode="edge")
    out = np.zeros_like(values)
    for k in range(kernel.size):
        out += kernel[k] * padded[:, k : k + values.shape[1]]
    padded = np.pad(out, ((half, half), (0, 0)), mode="edge")
    out = np.zeros_like(values)
    for k in range(kernel.size):
        out += kernel[k] * padded[k : k + values.shape[0], :]
    return out


def _shift(values: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Shift a grid, filling vacated cells with zero."""
    out = np.zeros_like(values)
    h, w = values.shape
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    src_ys = slice(max(-dy, 0), h + min(-dy, 0))
    src_xs = slice(max(-dx, 0), w + min(-dx, 0))
    out[ys, xs] = values[src_ys, src_xs]
    return out


def _sobel(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # replicate the border so a constant image has exactly zero gradient
    p = np.pad(values, 1, mode="edge")
    gx = (
        p[1:-1, 2:] * 2
        + p[:-2, 2:]
        + p[2:, 2:]
        - p[1:-1, :-2] * 2
        - p[:-2, :-2]
        - p[2:, :-2]
    )
    gy = (
        p[2:, 1:-1] * 2
        + p[2:, :-2]
        + p[2:, 2:]
        - p[:-2, 1:-1] * 2
        - p[:-2, :-2]
        - p[:-2, 2:]
    )
    return gx, gy


def canny(img: GrayImage, low: float = 0.1, high: float = 0.3) -> EdgeMap:
    """Classical edge detection: Gaussian smoothing, Sobel gradients,
    non-maximum suppression, double threshold, hysteresis tracking.

    Thresholds are fractions of the peak gradient magnitude, so they live
    in [0, 1] regardless of image content. Deterministic for fixed inputs.
    """
    if not (0.0 <= low <= 1.0 and 0.0 <= high <= 1.0):
        raise InvalidArgumentError("thresholds must lie in [0, 1]")
    if low >= high:
        raise InvalidArgumentError(f"low threshold ({low}) must be below high ({high})")

    kernel = _gaussian_kernel_1d(GAUSSIAN_SIZE, GAUSSIAN_SIGMA)
    smoothed = _convolve_separable(img.values, kernel)
    gx, gy = _sobel(smoothed)
    magnitude = np.hypot(gx, gy)
    peak = magnitude.max()
    if peak <= 0:
        return RasterMask.empty(img.width, img.height)
    magnitude = magnitude / peak

    # non-maximum suppression along the quantized gradient direction
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    neighbors = [
        ((0, 1), (0, -1)),   # ~0 deg: horizontal gradient
        ((1, 1), (-1, -1)),  # ~45 deg: gradient along the main diagonal
        ((-1, 0), (1, 0)),   # ~90 deg: vertical gradient
        ((1, -1), (-1, 1)),  # ~135 deg: gradient along the anti-diagonal
    ]
    sector = np.zeros(angle.shape, dtype=np.int8)
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3
    suppressed = np.zeros_like(magnitude)
    for s, ((dy1, dx1), (dy2, dx2)) in enumerate(neighbors):
        in_sector = sector == s
        n1 = _shift(magnitude, -dy1, -dx1)
        n2 = _shift(magnitude, -dy2, -dx2)
        keep = in_sector & (magnitude >= n1) & (magnitude >= n2)
        suppressed[keep] = magnitude[keep]

    strong = suppressed >= high
    weak = (suppressed >= low) & ~strong

    # hysteresis: grow strong edges through 8-connected weak pixels
    edges = strong.copy()
    while True:
        grown = edges.copy()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                grown |= _shift(edges, dy, dx)
        grown &= weak | strong
        if np.array_equal(grown, edges):
            break
        edges = grown
    return RasterMask(img.width, img.height, edges)


# ---------------------------------------------------------------------------
# Anchor composition
# ---------------------------------------------------------------------------


def compose_anchor(
    placements: list[tuple[EdgeMap, RasterMask, int]],
) -> tuple[EdgeMap, list[RasterMask]]:
    """Composite per-object edge maps and masks into one anchor.

    Layers stack in ascending z; wherever masks overlap, the higher-z mask
    occludes: the lower layer loses both its mask pixels and its edge pixels
    under the overlap. Returned masks (input order) are pairwise disjoint.
    """
    if not placements:
        raise InvalidArgumentError("compose_anchor requires at least one placement")
    w, h = placements[0][0].width, placements[0][0].height
    for edges, mask, _ in placements:
        if (edges.width, edges.height) != (w, h) or (mask.width, mask.height) != (w, h):
            raise InvalidArgumentError("all placements must share canvas dimensions")

    out_masks: list[RasterMask] = []
    anchor = np.zeros((h, w), dtype=bool)
    for i, (edges, mask, z) in enumerate(placements):
        above = np.zeros((h, w), dtype=bool)
        for j, (_, other_mask, other_z) in enumerate(placements):
            if other_z > z or (other_z == z and j > i):
                above |= other_mask.bits
        kept_mask = mask.bits & ~above
        kept_edges = edges.bits & ~above
        out_masks.append(RasterMask(w, h, kept_mask))
        anchor |= kept_edges
    return RasterMask(w, h, anchor), out_masks
