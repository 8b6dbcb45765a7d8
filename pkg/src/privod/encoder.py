"""Temporal three-channel frame encoding.

The RGB channels handed to an off-the-shelf detector are repurposed:

* red: luma of the current frame,
* green: thresholded absolute luma difference to the previous frame,
* blue: a bitmap of the previous frame's boxes, ``MARK`` inside, 0 outside.

During training the blue bitmap comes from ground truth and is randomly
thinned (see :class:`AugmentationPolicy`); at inference it is rendered from
the previous frame's predictions above a confidence floor, unmodified.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from privod import rng as rng_mod
from privod.geometry import OrientedBox
from privod.raster import MOTION_THRESHOLD, box_window, motion_map, to_grayscale
from privod.validation import check_frame, check_nonnegative, check_probability, check_same_shape

# Blue-channel value inside boxes. The value itself carries no meaning.
MARK = 32

GROUND_TRUTH = "ground_truth"
PREDICTIONS = "predictions"
CONFIDENCE_FLOOR = 0.25


@dataclass(frozen=True)
class AugmentationPolicy:
    """Random thinning of the blue-channel boxes used at training time.

    Gates are drawn in this order from one generator: use-bitmap (one
    uniform), discard-all (one uniform, only if the bitmap is used), then one
    uniform per box for the jitter gate followed by one ``(dx, dy)`` pair per
    box, drawn for every box so the stream layout does not depend on the
    outcome of individual gates.
    """

    p_use_bitmap: float = 0.5
    p_discard_all: float = 0.2
    p_jitter_box: float = 0.6
    jitter_max: float = 10.0
    seed: int = 0

    def __post_init__(self):
        for name in ("p_use_bitmap", "p_discard_all", "p_jitter_box"):
            check_probability(name, getattr(self, name))
        check_nonnegative("jitter_max", self.jitter_max)
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")


@dataclass(frozen=True)
class BoxSource:
    """Boxes of the previous frame, either ground truth or detector output."""

    mode: str
    boxes: tuple[OrientedBox, ...] = ()
    confidences: tuple[float, ...] | None = None
    confidence_floor: float = CONFIDENCE_FLOOR

    def __post_init__(self):
        if self.mode not in (GROUND_TRUTH, PREDICTIONS):
            raise ValueError(f"mode must be {GROUND_TRUTH!r} or {PREDICTIONS!r}, got {self.mode!r}")
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if self.confidences is not None:
            confs = tuple(check_probability("confidence", c) for c in self.confidences)
            if len(confs) != len(self.boxes):
                raise ValueError(f"{len(confs)} confidences for {len(self.boxes)} boxes")
            object.__setattr__(self, "confidences", confs)
        check_probability("confidence_floor", self.confidence_floor)

    @classmethod
    def ground_truth(cls, boxes: Sequence[OrientedBox]) -> BoxSource:
        return cls(GROUND_TRUTH, tuple(boxes))

    @classmethod
    def predictions(
        cls, boxes: Sequence[OrientedBox], confidences: Sequence[float], confidence_floor: float = CONFIDENCE_FLOOR
    ) -> BoxSource:
        return cls(PREDICTIONS, tuple(boxes), tuple(confidences), confidence_floor)

    def confident_boxes(self) -> list[OrientedBox]:
        if self.mode == GROUND_TRUTH:
            return list(self.boxes)
        if self.confidences is None:
            raise ValueError("predictions source needs confidences")
        return [b for b, c in zip(self.boxes, self.confidences) if c >= self.confidence_floor]


@dataclass(frozen=True)
class GateRecord:
    """Which random gates fired while encoding one frame (audit trail)."""

    index: int
    mode: str
    use_bitmap: bool | None = None
    discard_all: bool | None = None
    jittered: tuple[bool, ...] = ()
    offsets: tuple[tuple[float, float], ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "index": self.index,
                "mode": self.mode,
                "use_bitmap": self.use_bitmap,
                "discard_all": self.discard_all,
                "jittered": [int(j) for j in self.jittered],
                "offsets": [[round(dx, 6), round(dy, 6)] for dx, dy in self.offsets],
            },
            separators=(",", ":"),
        )


@dataclass(frozen=True, eq=False)
class EncodedFrame:
    red: np.ndarray
    green: np.ndarray
    blue: np.ndarray
    index: int = 0
    audit: GateRecord | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.red.shape == self.green.shape == self.blue.shape:
            raise ValueError("encoded channels must share one shape")

    def to_array(self) -> np.ndarray:
        """Interleave into an ``(H, W, 3)`` RGB image."""
        return np.stack([self.red, self.green, self.blue], axis=-1)

    def __array__(self, dtype=None, copy=None):
        arr = self.to_array()
        return arr if dtype is None else arr.astype(dtype)


def render_bitmap(boxes: Sequence[OrientedBox], width: int, height: int, mark: int = MARK) -> np.ndarray:
    """Rasterize boxes into a one-channel mask.

    Pixel ``(x, y)`` is marked when its center ``(x + 0.5, y + 0.5)`` lies inside
    any box (boundary included). Overlaps do not accumulate; parts of boxes
    outside the frame are dropped.
    """
    if not 1 <= mark <= 255:
        raise ValueError(f"mark must be in [1, 255], got {mark}")
    out = np.zeros((height, width), dtype=np.uint8)
    for box in boxes:
        window = box_window(box, width, height)
        if window is not None:
            rows, cols, mask = window
            out[rows, cols][mask] = mark
    return out


def _augment(
    boxes: Sequence[OrientedBox], policy: AugmentationPolicy, rng: np.random.Generator
) -> tuple[list[OrientedBox], bool, tuple[bool, ...], tuple[tuple[float, float], ...]]:
    if rng.random() < policy.p_discard_all:
        return [], True, (), ()
    n = len(boxes)
    if n == 0:
        return [], False, (), ()
    gates = rng.random(n) < policy.p_jitter_box
    shifts = rng.uniform(-policy.jitter_max, policy.jitter_max, size=(n, 2))
    out = []
    offsets = []
    for box, jitter, (dx, dy) in zip(boxes, gates, shifts):
        if jitter:
            out.append(box.translated(float(dx), float(dy)))
            offsets.append((float(dx), float(dy)))
        else:
            out.append(box)
    return out, False, tuple(bool(g) for g in gates), tuple(offsets)


def augment_boxes(
    boxes: Sequence[OrientedBox], policy: AugmentationPolicy, rng: np.random.Generator
) -> list[OrientedBox]:
    """Drop all boxes with ``p_discard_all``, else shift each with ``p_jitter_box``.

    A shift moves the center by ``(dx, dy)``, each uniform on
    ``[-jitter_max, jitter_max]``; size and angle are kept.
    """
    return _augment(boxes, policy, rng)[0]


def encode(
    current,
    previous=None,
    source: BoxSource | None = None,
    policy: AugmentationPolicy | None = None,
    motion_threshold: int = MOTION_THRESHOLD,
    rng: np.random.Generator | None = None,
    index: int = 0,
) -> EncodedFrame:
    """Encode one RGB frame into the (luma, motion, previous-boxes) layout.

    Args:
        current: ``(H, W, 3)`` frame to encode.
        previous: the preceding RGB frame, or None for the first frame of a
            video (green channel is then all zero).
        source: boxes of the previous frame, or None for an empty blue channel.
        policy: training-mode augmentation. None selects inference mode, where
            the confidence-filtered boxes are drawn as-is.
        motion_threshold: see :func:`privod.raster.motion_map`.
        rng: generator for the augmentation gates. Defaults to the per-frame
            stream ``privod.rng.stream(policy.seed, "encode", index)``.
        index: frame number, stored on the result and used to pick the stream.

    Raises:
        ValueError: on shape mismatch, or a predictions source without
            confidences in inference mode.
    """
    cur = check_frame(current, channels=3)
    height, width = cur.shape[:2]
    red = to_grayscale(cur)
    if previous is None:
        green = np.zeros_like(red)
    else:
        prev = check_frame(previous, channels=3)
        check_same_shape(cur, prev)
        green = motion_map(red, to_grayscale(prev), motion_threshold)

    blank = np.zeros_like(red)
    if source is None:
        return EncodedFrame(red, green, blank, index, GateRecord(index, "none"))

    if policy is None:
        blue = render_bitmap(source.confident_boxes(), width, height, MARK)
        return EncodedFrame(red, green, blue, index, GateRecord(index, "infer"))

    if rng is None:
        rng = rng_mod.stream(policy.seed, rng_mod.STAGE_ENCODE, index)
    if not rng.random() < policy.p_use_bitmap:
        return EncodedFrame(red, green, blank, index, GateRecord(index, "train", use_bitmap=False))
    boxes, discarded, jittered, offsets = _augment(source.boxes, policy, rng)
    blue = render_bitmap(boxes, width, height, MARK)
    record = GateRecord(index, "train", True, discarded, jittered, offsets)
    return EncodedFrame(red, green, blue, index, record)
