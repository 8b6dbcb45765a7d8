"""Motion-based clip extraction from long recordings.

A per-frame motion metric (mean absolute luma difference to an earlier frame)
is thresholded; every frame above threshold is padded on both sides and
overlapping or touching intervals are merged into clips.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from privod.raster import DEFAULT_FPS, mean_abs_diff, to_grayscale
from privod.validation import check_frame

CLIP_THRESHOLD = 2.0
PAD_SECONDS = 10.0
CSV_HEADER = ("video_id", "start_frame", "end_frame", "peak_motion")


@dataclass(frozen=True)
class ClipSegment:
    """Frames ``[start, end)`` of ``source_video``."""

    start: int
    end: int
    peak_motion: float = 0.0
    source_video: str = ""

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"need 0 <= start < end, got [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start


def _luma(frame) -> np.ndarray:
    data = check_frame(frame)
    return to_grayscale(data) if data.ndim == 3 else data


def iter_motion(frames: Iterable, stride: int = 1) -> Iterable[tuple[int, float]]:
    """Streaming form of :func:`motion_series`; keeps ``stride`` frames in memory."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    window: list[np.ndarray] = []
    for i, frame in enumerate(frames):
        gray = _luma(frame)
        if len(window) == stride:
            yield i, mean_abs_diff(gray, window[0])
            window.pop(0)
        window.append(gray)


def motion_series(frames: Sequence, stride: int = 1) -> list[tuple[int, float]]:
    """Mean absolute luma difference of frame ``i`` against frame ``i - stride``.

    The first ``stride`` frames have no predecessor and produce no entry.

    Raises:
        ValueError: for fewer than two frames or ``stride < 1``.
    """
    if len(frames) < 2:
        raise ValueError(f"motion series needs at least 2 frames, got {len(frames)}")
    return list(iter_motion(frames, stride))


def merge_segments(segments: Iterable[ClipSegment]) -> list[ClipSegment]:
    """Merge overlapping or touching segments of the same video."""
    out: list[ClipSegment] = []
    for seg in sorted(segments, key=lambda s: (s.source_video, s.start, s.end)):
        if out and out[-1].source_video == seg.source_video and seg.start <= out[-1].end:
            last = out[-1]
            out[-1] = ClipSegment(
                last.start, max(last.end, seg.end), max(last.peak_motion, seg.peak_motion), last.source_video
            )
        else:
            out.append(seg)
    return out


def extract_segments(
    series: Iterable[tuple[int, float]],
    threshold: float = CLIP_THRESHOLD,
    pad: float = PAD_SECONDS,
    fps: float = DEFAULT_FPS,
    frame_count: int | None = None,
    video_id: str = "",
) -> list[ClipSegment]:
    """Turn a motion series into padded, merged clips.

    Each index whose value exceeds ``threshold`` becomes ``[i, i + 1)``,
    widened by ``round(pad * fps)`` frames per side and clamped to
    ``[0, frame_count]``. Runs of consecutive indices therefore become one
    segment, and segments closer than two pads merge.

    Args:
        series: ``(frame index, metric)`` pairs sorted by index.
        threshold: values strictly above this count as motion.
        pad: seconds added on both sides.
        fps: frame rate used to convert ``pad`` to frames.
        frame_count: total frames in the video; defaults to last index + 1.
        video_id: stored on every segment.
    """
    if pad < 0:
        raise ValueError(f"pad must be >= 0, got {pad}")
    if not fps > 0:
        raise ValueError(f"fps must be > 0, got {fps}")
    series = list(series)
    if not series:
        return []
    if frame_count is None:
        frame_count = series[-1][0] + 1
    pad_frames = int(round(pad * fps))
    raw = []
    for index, value in series:
        if value > threshold:
            start = max(0, index - pad_frames)
            end = min(frame_count, index + 1 + pad_frames)
            if start < end:
                raw.append(ClipSegment(start, end, float(value), video_id))
    return merge_segments(raw)


def covered_frames(segments: Iterable[ClipSegment]) -> int:
    return sum(len(s) for s in segments)


def segments_to_csv(segments: Iterable[ClipSegment]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for s in segments:
        writer.writerow((s.source_video, s.start, s.end, f"{s.peak_motion:.6f}"))
    return buf.getvalue()


def segments_from_csv(text: str) -> list[ClipSegment]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"clip CSV must start with header {','.join(CSV_HEADER)}")
    return [ClipSegment(int(r[1]), int(r[2]), float(r[3]), r[0]) for r in rows[1:] if r]
