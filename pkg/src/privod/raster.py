"""8-bit frames and the per-pixel primitives: luma, box blur, differences.

Frames are plain ``uint8`` numpy arrays shaped ``(height, width)`` for one
channel or ``(height, width, 3)`` for interleaved RGB. :class:`Frame` wraps an
array with its position in the video when that context matters (streams,
clip extraction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from privod.validation import check_frame, check_same_shape

DEFAULT_FPS = 25.0
DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 400

BLUR_RADIUS = 6
BLUR_PASSES = 1
MOTION_THRESHOLD = 15

# Luma weights scaled to integers summing to 1000 so rounding is exact.
_LUMA = (299, 587, 114)


@dataclass(frozen=True)
class VideoMeta:
    fps: float = DEFAULT_FPS
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    frame_count: int = 0

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError(f"fps must be > 0, got {self.fps}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"frame size must be positive, got {self.width}x{self.height}")
        if self.frame_count < 0:
            raise ValueError(f"frame_count must be >= 0, got {self.frame_count}")


@dataclass(frozen=True, eq=False)
class Frame:
    """A raster plus its frame number. ``np.asarray(frame)`` yields the data."""

    data: np.ndarray
    index: int = 0
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        data = check_frame(self.data)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]

    @property
    def timestamp(self) -> float:
        return self.index / self.fps


def to_grayscale(frame) -> np.ndarray:
    """Rec. 601 luma, ``round(0.299 R + 0.587 G + 0.114 B)`` with halves rounded up."""
    rgb = check_frame(frame, channels=3).astype(np.uint32)
    acc = rgb[..., 0] * _LUMA[0] + rgb[..., 1] * _LUMA[1] + rgb[..., 2] * _LUMA[2]
    return ((acc + 500) // 1000).astype(np.uint8)


def _box_pass(data: np.ndarray, radius: int, axis: int) -> np.ndarray:
    n = 2 * radius + 1
    pad = [(0, 0)] * data.ndim
    pad[axis] = (radius + 1, radius)
    padded = np.pad(data.astype(np.int32), pad, mode="edge")
    # the extra leading sample is zeroed so window sums are cs[i+n] - cs[i]
    lead = [slice(None)] * data.ndim
    lead[axis] = slice(0, 1)
    padded[tuple(lead)] = 0
    cs = np.cumsum(padded, axis=axis)
    hi = [slice(None)] * data.ndim
    lo = [slice(None)] * data.ndim
    hi[axis] = slice(n, None)
    lo[axis] = slice(0, -n)
    sums = cs[tuple(hi)] - cs[tuple(lo)]
    return (2 * sums + n) // (2 * n)


def box_blur(frame, radius: int = BLUR_RADIUS, passes: int = BLUR_PASSES) -> np.ndarray:
    """Separable mean filter over a ``(2*radius+1)`` square window.

    Each pass runs horizontally and then vertically; every 1-D pass rounds half
    up back to integers. Borders replicate the edge sample. Channels are
    filtered independently.

    Raises:
        ValueError: if ``radius`` is negative, ``passes < 1``, or ``radius`` is
            not smaller than every frame dimension longer than one pixel.
    """
    data = check_frame(frame)
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if passes < 1:
        raise ValueError(f"passes must be >= 1, got {passes}")
    h, w = data.shape[:2]
    for dim in (h, w):
        if dim > 1 and radius >= dim:
            raise ValueError(f"radius {radius} must be smaller than frame size {w}x{h}")
    if radius == 0:
        return data.copy()
    out = data
    for _ in range(passes):
        out = _box_pass(out, radius, axis=1)
        out = _box_pass(out, radius, axis=0)
    return out.astype(np.uint8)


def abs_diff(current, previous) -> np.ndarray:
    cur = check_frame(current, channels=1)
    prev = check_frame(previous, channels=1)
    check_same_shape(cur, prev)
    return np.abs(cur.astype(np.int16) - prev.astype(np.int16)).astype(np.uint8)


def motion_map(current, previous, threshold: int = MOTION_THRESHOLD) -> np.ndarray:
    """Absolute difference with samples below ``threshold`` zeroed.

    Samples at or above the threshold keep their magnitude.
    """
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {threshold}")
    diff = abs_diff(current, previous)
    diff[diff < threshold] = 0
    return diff


def mean_abs_diff(current, previous) -> float:
    diff = abs_diff(current, previous)
    return int(diff.sum(dtype=np.int64)) / diff.size


def box_window(box, width: int, height: int) -> tuple[slice, slice, np.ndarray] | None:
    """Pixels of a frame whose centers lie in ``box``, as a cropped mask.

    Returns ``(rows, cols, mask)`` where ``mask`` covers ``frame[rows, cols]``,
    or None when no pixel center is inside. Pixel ``(x, y)`` has its center at
    ``(x + 0.5, y + 0.5)``; centers on the boundary count as inside.
    """
    x0, y0, x1, y1 = box.axis_bounds()
    i0 = max(0, math.ceil(x0 - 0.5))
    i1 = min(width - 1, math.floor(x1 - 0.5))
    j0 = max(0, math.ceil(y0 - 0.5))
    j1 = min(height - 1, math.floor(y1 - 0.5))
    if i0 > i1 or j0 > j1:
        return None
    xs = np.arange(i0, i1 + 1, dtype=np.float64) + 0.5
    ys = np.arange(j0, j1 + 1, dtype=np.float64)[:, None] + 0.5
    return slice(j0, j1 + 1), slice(i0, i1 + 1), box.contains(xs, ys)


def box_mask(box, width: int, height: int) -> np.ndarray:
    """Full-frame boolean mask of the pixels selected by :func:`box_window`."""
    out = np.zeros((height, width), dtype=bool)
    window = box_window(box, width, height)
    if window is not None:
        rows, cols, mask = window
        out[rows, cols] = mask
    return out
