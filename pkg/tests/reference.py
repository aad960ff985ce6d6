"""Independent reference implementations used as test oracles.

Everything here is deliberately written with a different structure than the
package code (integer bit tricks, dense Python loops, BFS) so that agreement
between the two is meaningful evidence rather than shared bugs.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


# ---------------------------------------------------------------------------
# mask algebra on 3x3 grids, encoded as 9-bit integers (row-major, bit 0 = top
# left). popcount and set algebra come straight from the bitwise operators.


def int_to_mask(value: int, width: int = 3, height: int = 3) -> np.ndarray:
    bits = np.zeros((height, width), dtype=bool)
    for i in range(width * height):
        if value >> i & 1:
            bits[i // width, i % width] = True
    return bits


def mask_to_int(bits: np.ndarray) -> int:
    value = 0
    flat = bits.ravel()
    for i in range(flat.size):
        if flat[i]:
            value |= 1 << i
    return value


def ref_iou_ints(a: int, b: int) -> float:
    union = a | b
    if union == 0:
        return 0.0
    return (a & b).bit_count() / union.bit_count()


def ref_union_int(a: int, b: int) -> int:
    return a | b


def ref_difference_int(a: int, b: int) -> int:
    return a & ~b


# ---------------------------------------------------------------------------
# pixel-counting oracles for arbitrary boolean arrays


def ref_iou_arrays(a: np.ndarray, b: np.ndarray) -> float:
    inter = 0
    union = 0
    for y in range(a.shape[0]):
        for x in range(a.shape[1]):
            if a[y, x] and b[y, x]:
                inter += 1
            if a[y, x] or b[y, x]:
                union += 1
    if union == 0:
        return 0.0
    return inter / union


# ---------------------------------------------------------------------------
# downsample-majority oracle: per output cell, count covered input pixels


def ref_downsample(bits: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    in_h, in_w = bits.shape
    out = np.zeros((out_h, out_w), dtype=bool)
    for oy in range(out_h):
        y0 = oy * in_h // out_h
        y1 = (oy + 1) * in_h // out_h
        for ox in range(out_w):
            x0 = ox * in_w // out_w
            x1 = (ox + 1) * in_w // out_w
            area = (y1 - y0) * (x1 - x0)
            covered = 0
            for y in range(y0, y1):
                for x in range(x0, x1):
                    if bits[y, x]:
                        covered += 1
            out[oy, ox] = covered * 2 >= area
    return out


# ---------------------------------------------------------------------------
# attention plan oracle: dense triple loop over entries, cells, and span slots


def ref_apply_plan(logits: np.ndarray, entries, latent_w: int, latent_h: int) -> np.ndarray:
    out = logits.astype(np.float64).copy()
    for mask_bits, start, end, weight in entries:
        for y in range(latent_h):
            for x in range(latent_w):
                if mask_bits[y, x]:
                    row = y * latent_w + x
                    for t in range(start, end):
                        out[row, t] += weight
    return out


# ---------------------------------------------------------------------------
# BFS connected-component labeler (8-connectivity), for segmentation checks


def ref_label(bits: np.ndarray) -> tuple[np.ndarray, int]:
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)
    current = 0
    for sy in range(h):
        for sx in range(w):
            if not bits[sy, sx] or labels[sy, sx]:
                continue
            current += 1
            queue = deque([(sy, sx)])
            labels[sy, sx] = current
            while queue:
                y, x = queue.popleft()
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and not labels[ny, nx]:
                            labels[ny, nx] = current
                            queue.append((ny, nx))
    return labels, current


# ---------------------------------------------------------------------------
# reference edge detector. Same published conventions as the package (5x5
# Gaussian with sigma 1.4 and replicated borders, Sobel kernels zero-filled at
# the border, four-sector non-maximum suppression, hysteresis by BFS from
# strong pixels) but a completely loop-structured implementation. Border
# behaviour is left unharmonized on purpose; agreement is expected to be high
# but not exact.


def _gaussian_kernel(size: int = 5, sigma: float = 1.4) -> np.ndarray:
    half = size // 2
    kernel = np.zeros((size, size), dtype=np.float64)
    for y in range(size):
        for x in range(size):
            dy, dx = y - half, x - half
            kernel[y, x] = math.exp(-(dx * dx + dy * dy) / (2 * sigma * sigma))
    return kernel / kernel.sum()


def ref_canny(image: np.ndarray, low: float = 0.1, high: float = 0.3) -> np.ndarray:
    h, w = image.shape
    kernel = _gaussian_kernel()
    half = kernel.shape[0] // 2

    smoothed = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for ky in range(kernel.shape[0]):
                for kx in range(kernel.shape[1]):
                    sy = min(max(y + ky - half, 0), h - 1)
                    sx = min(max(x + kx - half, 0), w - 1)
                    acc += kernel[ky, kx] * image[sy, sx]
            smoothed[y, x] = acc

    sobel_x = ((-1, 0, 1), (-2, 0, 2), (-1, 0, 1))
    sobel_y = ((-1, -2, -1), (0, 0, 0), (1, 2, 1))
    gx = np.zeros((h, w), dtype=np.float64)
    gy = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            ax = ay = 0.0
            for ky in range(3):
                for kx in range(3):
                    sy, sx = y + ky - 1, x + kx - 1
                    if 0 <= sy < h and 0 <= sx < w:
                        ax += sobel_x[ky][kx] * smoothed[sy, sx]
                        ay += sobel_y[ky][kx] * smoothed[sy, sx]
            gx[y, x] = ax
            gy[y, x] = ay

    magnitude = np.hypot(gx, gy)
    peak = magnitude.max()
    if peak == 0:
        return np.zeros((h, w), dtype=bool)

    suppressed = np.zeros((h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            m = magnitude[y, x]
            if m == 0:
                continue
            angle = math.degrees(math.atan2(gy[y, x], gx[y, x])) % 180.0
            if angle < 22.5 or angle >= 157.5:
                n1, n2 = (y, x - 1), (y, x + 1)
            elif angle < 67.5:
                n1, n2 = (y + 1, x + 1), (y - 1, x - 1)
            elif angle < 112.5:
                n1, n2 = (y - 1, x), (y + 1, x)
            else:
                n1, n2 = (y + 1, x - 1), (y - 1, x + 1)
            vals = []
            for ny, nx in (n1, n2):
                vals.append(magnitude[ny, nx] if 0 <= ny < h and 0 <= nx < w else 0.0)
            if m >= vals[0] and m >= vals[1]:
                suppressed[y, x] = m

    strong = suppressed >= high * peak
    weak = suppressed >= low * peak

    edges = np.zeros((h, w), dtype=bool)
    queue = deque()
    for y in range(h):
        for x in range(w):
            if strong[y, x]:
                edges[y, x] = True
                queue.append((y, x))
    while queue:
        y, x = queue.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and weak[ny, nx] and not edges[ny, nx]:
                    edges[ny, nx] = True
                    queue.append((ny, nx))
    return edges
