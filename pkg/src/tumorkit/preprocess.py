"""Scan normalization: threshold, open, crop to the brain, resize, z-score.

The chain applied to every scan, in order:

1. threshold at 45 (strict ``pixel > t``),
2. 2 erosions then 2 dilations with a 3x3 square element (an opening that
   removes speckles smaller than a 5x5 square),
3. keep the largest 8-connected foreground component,
4. crop to the component's top/bottom/left/right extreme points,
5. bilinear resize to the model input size,
6. per-image z-score so the mean tends to 0 and the deviation to 1.

Steps 1-5 stay in 8-bit space; step 6 produces the float tensor fed to
the network.  Training augmentation slots between 5 and 6, which is why
:func:`crop_and_resize` is exposed separately from the full
:func:`preprocess_image`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NoForeground, ShapeMismatch
from .pgm import GrayImage8, image_to_tensor

DEFAULT_THRESHOLD = 45
DEFAULT_MORPH_ITERS = 2
DEFAULT_SIZE = 224

# population std below this is treated as a constant image
DEGENERATE_STD = 1e-8


class BinaryMask:
    """Boolean raster stored as a (height, width) bool array."""

    __slots__ = ("bits",)

    def __init__(self, bits: np.ndarray):
        arr = np.asarray(bits)
        if arr.ndim != 2 or arr.dtype != np.bool_:
            raise ValueError(f"expected a 2-d bool array, got {arr.dtype} {arr.shape}")
        self.bits = arr

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(
            (self.bits == other.bits).all()
        )

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, {self.count()} set)"


@dataclass(frozen=True)
class CropBox:
    """Inclusive pixel bounds of a foreground region."""

    top: int
    bottom: int
    left: int
    right: int

    def __post_init__(self):
        if not (0 <= self.top <= self.bottom and 0 <= self.left <= self.right):
            raise ValueError(f"invalid crop box {self}")

    @property
    def width(self) -> int:
        return self.right - self.left + 1

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1


def threshold(img: GrayImage8, t: int = DEFAULT_THRESHOLD) -> BinaryMask:
    """Foreground wherever ``pixel > t`` (strictly)."""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold {t} out of [0, 255]")
    return BinaryMask(img.pixels > t)


def _window_reduce(bits: np.ndarray, erode_mode: bool) -> np.ndarray:
    # pixels outside the image are background
    padded = np.pad(bits, 1, constant_values=False)
    windows = sliding_window_view(padded, (3, 3))
    return windows.all(axis=(-2, -1)) if erode_mode else windows.any(axis=(-2, -1))


def morphology(mask: BinaryMask, mode: str, iterations: int) -> BinaryMask:
    """Erode or dilate with a fixed 3x3 square element, ``iterations`` times."""
    if mode not in ("erode", "dilate"):
        raise ValueError(f"mode must be 'erode' or 'dilate', got {mode!r}")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    bits = mask.bits
    for _ in range(iterations):
        bits = _window_reduce(bits, erode_mode=(mode == "erode"))
    return BinaryMask(bits)


def erode(mask: BinaryMask, iterations: int = 1) -> BinaryMask:
    return morphology(mask, "erode", iterations)


def dilate(mask: BinaryMask, iterations: int = 1) -> BinaryMask:
    return morphology(mask, "dilate", iterations)


def largest_component(mask: BinaryMask) -> BinaryMask:
    """Keep only the largest 8-connected component.

    Ties go to the component containing the first foreground pixel in
    row-major order.
    """
    bits = mask.bits
    rows, cols = np.nonzero(bits)
    if rows.size == 0:
        raise NoForeground("mask has no foreground pixels")

    h, w = bits.shape
    visited = np.zeros_like(bits)
    best: list[tuple[int, int]] | None = None
    for r0, c0 in zip(rows.tolist(), cols.tolist()):
        if visited[r0, c0]:
            continue
        stack = [(r0, c0)]
        visited[r0, c0] = True
        component = []
        while stack:
            r, c = stack.pop()
            component.append((r, c))
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and bits[rr, cc] and not visited[rr, cc]:
                        visited[rr, cc] = True
                        stack.append((rr, cc))
        # row-major scan order means an equal-sized later component loses
        if best is None or len(component) > len(best):
            best = component

    out = np.zeros_like(bits)
    idx = np.array(best)
    out[idx[:, 0], idx[:, 1]] = True
    return BinaryMask(out)


def foreground_box(mask: BinaryMask) -> CropBox:
    """Bounding box of the foreground extreme points, inclusive."""
    rows, cols = np.nonzero(mask.bits)
    if rows.size == 0:
        raise NoForeground("mask has no foreground pixels")
    return CropBox(
        top=int(rows.min()),
        bottom=int(rows.max()),
        left=int(cols.min()),
        right=int(cols.max()),
    )


def crop_to_extremes(img: GrayImage8, mask: BinaryMask) -> GrayImage8:
    """Crop ``img`` to the mask's extreme-point bounding box."""
    if (img.height, img.width) != (mask.height, mask.width):
        raise ShapeMismatch(
            f"image {img.width}x{img.height} vs mask {mask.width}x{mask.height}"
        )
    box = foreground_box(mask)
    return GrayImage8(img.pixels[box.top : box.bottom + 1, box.left : box.right + 1].copy())


def resize_bilinear(img: GrayImage8, out_w: int, out_h: int) -> GrayImage8:
    """Bilinear resize with half-pixel-center mapping.

    Each output pixel samples the source at ``(dst + 0.5) * scale - 0.5``
    per axis; coordinates past the edges replicate the border pixel, and
    results are rounded half up into 8 bits.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be >= 1")
    src = img.pixels.astype(np.float64)
    h, w = src.shape

    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    fy = ys - y0
    fx = xs - x0
    y0c = np.clip(y0, 0, h - 1).astype(np.intp)
    y1c = np.clip(y0 + 1, 0, h - 1).astype(np.intp)
    x0c = np.clip(x0, 0, w - 1).astype(np.intp)
    x1c = np.clip(x0 + 1, 0, w - 1).astype(np.intp)

    top = src[y0c[:, None], x0c] * (1 - fx) + src[y0c[:, None], x1c] * fx
    bot = src[y1c[:, None], x0c] * (1 - fx) + src[y1c[:, None], x1c] * fx
    values = top * (1 - fy[:, None]) + bot * fy[:, None]
    rounded = np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)
    return GrayImage8(rounded)


def normalize_zscore(t: np.ndarray, degenerate_std: float = DEGENERATE_STD) -> np.ndarray:
    """Subtract the mean and divide by the population std, per image.

    A (near-)constant input maps to the all-zero tensor instead of blowing
    up, so constant tiles cannot crash a batch job.
    """
    arr = np.asarray(t)
    if arr.size == 0:
        raise ValueError("cannot normalize an empty tensor")
    dtype = arr.dtype if np.issubdtype(arr.dtype, np.floating) else np.float32
    mean = float(arr.mean(dtype=np.float64))
    std = float(arr.std(dtype=np.float64))  # population (divide by N)
    if std < degenerate_std:
        return np.zeros(arr.shape, dtype=dtype)
    return ((arr.astype(np.float64) - mean) / std).astype(dtype)


def compute_crop_box(
    img: GrayImage8,
    t: int = DEFAULT_THRESHOLD,
    iters: int = DEFAULT_MORPH_ITERS,
) -> CropBox:
    """Crop box after threshold, opening, and largest-component selection."""
    mask = threshold(img, t)
    mask = erode(mask, iters)
    mask = dilate(mask, iters)
    return foreground_box(largest_component(mask))


def crop_and_resize(
    img: GrayImage8,
    t: int = DEFAULT_THRESHOLD,
    iters: int = DEFAULT_MORPH_ITERS,
    out_size: int = DEFAULT_SIZE,
) -> GrayImage8:
    """The 8-bit part of the chain: steps 1-5, no normalization yet."""
    box = compute_crop_box(img, t, iters)
    cropped = GrayImage8(img.pixels[box.top : box.bottom + 1, box.left : box.right + 1])
    return resize_bilinear(cropped, out_size, out_size)


def preprocess_image(
    img: GrayImage8,
    t: int = DEFAULT_THRESHOLD,
    iters: int = DEFAULT_MORPH_ITERS,
    out_size: int = DEFAULT_SIZE,
    dtype=np.float32,
) -> np.ndarray:
    """Full chain; returns a normalized [1, out_size, out_size] tensor."""
    resized = crop_and_resize(img, t, iters, out_size)
    return normalize_zscore(image_to_tensor(resized, dtype=dtype))
