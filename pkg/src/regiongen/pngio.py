"""PNG serialization for masks, gray images, and RGB rasters.

Masks serialize as 8-bit grayscale PNG, 255 = inside, 0 = outside.
Encoding is deterministic: same pixels in, same bytes out, which the
engine's replay guarantees rely on.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .errors import FormatError
from .masks import GrayImage, RasterMask


def _png_bytes(image: Image.Image) -> bytes:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def encode_mask(mask: RasterMask) -> bytes:
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    return _png_bytes(Image.fromarray(arr, mode="L"))


def decode_mask(data: bytes) -> RasterMask:
    try:
        img = Image.open(io.BytesIO(data))
    except Exception as exc:
        raise FormatError(f"not a decodable image: {exc}") from exc
    arr = np.asarray(img.convert("L"))
    return RasterMask(arr.shape[1], arr.shape[0], arr >= 128)


def encode_gray(img: GrayImage) -> bytes:
    arr = np.clip(np.rint(img.values * 255.0), 0, 255).astype(np.uint8)
    return _png_bytes(Image.fromarray(arr, mode="L"))


def decode_gray(data: bytes) -> GrayImage:
    try:
        img = Image.open(io.BytesIO(data))
    except Exception as exc:
        raise FormatError(f"not a decodable image: {exc}") from exc
    arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    return GrayImage(arr.shape[1], arr.shape[0], arr)


def encode_rgb(pixels: np.ndarray) -> bytes:
    arr = np.asarray(pixels, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise FormatError("RGB raster must have shape (height, width, 3)")
    return _png_bytes(Image.fromarray(arr, mode="RGB"))


def decode_rgb(data: bytes) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(data))
    except Exception as exc:
        raise FormatError(f"not a decodable image: {exc}") from exc
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def luminance(pixels: np.ndarray) -> GrayImage:
    """Rec. 601 luma of an RGB raster, scaled to [0, 1]."""
    arr = np.asarray(pixels, dtype=np.float64)
    gray = (0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]) / 255.0
    return GrayImage(gray.shape[1], gray.shape[0], np.clip(gray, 0.0, 1.0))
