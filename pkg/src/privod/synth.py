"""Synthetic bedside scenes with exact ground truth.

Actors are flat-colored oriented rectangles moving along piecewise-linear
keyframe paths. Frames get per-pixel Gaussian-shaped integer noise and the privacy box blur,
so every downstream stage can be exercised without patient data.

Scene documents are JSON::

    {
      "canvas": {"width": 640, "height": 400, "fps": 25, "frame_count": 750},
      "background": 30,
      "noise_sigma": 3.0,
      "blur": {"radius": 6, "passes": 1},
      "seed": 0,
      "actors": [
        {"class": "staff", "intensity": 245, "texture_seed": 4,
         "trajectory": [[0, [cx, cy, w, h, theta]], [120, [...]]]}
      ]
    }

An actor is visible from its first to its last keyframe, inclusive.
"""

from __future__ import annotations

import functools
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from privod import rng as rng_mod
from privod.dataset import CLASS_IDS, CLASS_NAMES, Annotation, class_id
from privod.errors import FormatError
from privod.geometry import OrientedBox
from privod.raster import BLUR_PASSES, BLUR_RADIUS, VideoMeta, box_blur, box_window

# Back-to-front painting order by class.
PAINT_ORDER = (CLASS_IDS["bed"], CLASS_IDS["patient"], CLASS_IDS["devices"], CLASS_IDS["staff"])
STAGE_TEXTURE = "texture"


@dataclass(frozen=True)
class Actor:
    class_id: int
    trajectory: tuple[tuple[int, OrientedBox], ...]
    intensity: int = 128
    texture_seed: int = 0

    def __post_init__(self):
        if not self.trajectory:
            raise ValueError("actor trajectory needs at least one keyframe")
        traj = tuple((int(f), b) for f, b in self.trajectory)
        frames = [f for f, _ in traj]
        if frames != sorted(frames) or len(set(frames)) != len(frames):
            raise ValueError(f"trajectory keyframes must be strictly increasing, got {frames}")
        if frames[0] < 0:
            raise ValueError("trajectory keyframes must be >= 0")
        if not 0 <= self.intensity <= 255:
            raise ValueError(f"intensity must be in [0, 255], got {self.intensity}")
        object.__setattr__(self, "trajectory", traj)

    @property
    def span(self) -> tuple[int, int]:
        return self.trajectory[0][0], self.trajectory[-1][0]

    def box_at(self, index: int) -> OrientedBox | None:
        """Linearly interpolated box, or None outside the keyframe span."""
        first, last = self.span
        if index < first or index > last:
            return None
        for (f0, b0), (f1, b1) in zip(self.trajectory, self.trajectory[1:]):
            if f0 <= index <= f1:
                if index == f0:
                    return b0
                t = (index - f0) / (f1 - f0)
                # shortest turn modulo pi, since rectangles repeat every half turn
                dtheta = (b1.theta - b0.theta + math.pi / 2) % math.pi - math.pi / 2
                return OrientedBox(
                    b0.cx + t * (b1.cx - b0.cx),
                    b0.cy + t * (b1.cy - b0.cy),
                    b0.w + t * (b1.w - b0.w),
                    b0.h + t * (b1.h - b0.h),
                    b0.theta + t * dtheta,
                )
        return self.trajectory[-1][1]

    def color(self) -> np.ndarray:
        """Flat RGB color: ``intensity`` plus a small tint fixed by ``texture_seed``."""
        tint = rng_mod.stream(self.texture_seed, STAGE_TEXTURE).integers(-12, 13, size=3)
        return np.clip(self.intensity + tint, 0, 255).astype(np.int16)


@dataclass(frozen=True)
class SceneScript:
    canvas: VideoMeta
    actors: tuple[Actor, ...] = ()
    noise_sigma: float = 0.0
    blur: tuple[int, int] = (BLUR_RADIUS, BLUR_PASSES)
    seed: int = 0
    background: int = 30
    # scripted [first moving frame, last moving frame] of the staff, if any
    motion_interval: tuple[int, int] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "actors", tuple(self.actors))
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        radius, passes = self.blur
        if radius < 0 or passes < 1:
            raise ValueError(f"invalid blur {self.blur}")
        if not 0 <= self.background <= 255:
            raise ValueError(f"background must be in [0, 255], got {self.background}")
        for actor in self.actors:
            if actor.span[1] >= self.canvas.frame_count:
                raise ValueError(
                    f"{CLASS_NAMES[actor.class_id]} trajectory reaches frame {actor.span[1]} "
                    f"but the canvas has {self.canvas.frame_count} frames"
                )

    def to_dict(self) -> dict:
        c = self.canvas
        doc = {
            "canvas": {"width": c.width, "height": c.height, "fps": c.fps, "frame_count": c.frame_count},
            "background": self.background,
            "noise_sigma": self.noise_sigma,
            "blur": {"radius": self.blur[0], "passes": self.blur[1]},
            "seed": self.seed,
            "actors": [
                {
                    "class": CLASS_NAMES[a.class_id],
                    "intensity": a.intensity,
                    "texture_seed": a.texture_seed,
                    "trajectory": [[f, list(b.as_tuple())] for f, b in a.trajectory],
                }
                for a in self.actors
            ],
        }
        if self.motion_interval is not None:
            doc["motion_interval"] = list(self.motion_interval)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> SceneScript:
        try:
            canvas = VideoMeta(**doc["canvas"])
            actors = [
                Actor(
                    class_id(a["class"]),
                    tuple((f, OrientedBox(*box)) for f, box in a["trajectory"]),
                    int(a.get("intensity", 128)),
                    int(a.get("texture_seed", 0)),
                )
                for a in doc.get("actors", [])
            ]
            blur = doc.get("blur", {})
            interval = doc.get("motion_interval")
            return cls(
                canvas=canvas,
                actors=tuple(actors),
                noise_sigma=float(doc.get("noise_sigma", 0.0)),
                blur=(int(blur.get("radius", BLUR_RADIUS)), int(blur.get("passes", BLUR_PASSES))),
                seed=int(doc.get("seed", 0)),
                background=int(doc.get("background", 30)),
                motion_interval=tuple(interval) if interval else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"invalid scene script: {exc!r}") from None

    @classmethod
    def from_json(cls, text: str) -> SceneScript:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"scene script is not JSON: {exc}") from None
        return cls.from_dict(doc)


@functools.lru_cache(maxsize=8)
def noise_table(sigma: float) -> np.ndarray:
    """Integer Gaussian quantiles: byte ``u`` maps to ``rint(sigma * Phi^-1((u + 0.5) / 256))``."""
    if sigma <= 0:
        table = np.zeros(256, dtype=np.int16)
    else:
        dist = statistics.NormalDist(0.0, sigma)
        table = np.array([round(dist.inv_cdf((u + 0.5) / 256)) for u in range(256)], dtype=np.int16)
    table.setflags(write=False)
    return table


def _paint_order(actors: Sequence[Actor]) -> list[Actor]:
    rank = {c: i for i, c in enumerate(PAINT_ORDER)}
    return sorted(actors, key=lambda a: rank[a.class_id])


def render_frame(script: SceneScript, index: int, colors=None) -> tuple[np.ndarray, list[Annotation]]:
    """Render frame ``index`` of ``script`` and its ground truth."""
    c = script.canvas
    canvas = np.full((c.height, c.width, 3), script.background, dtype=np.int16)
    if colors is None:
        colors = {id(a): a.color() for a in script.actors}
    for actor in _paint_order(script.actors):
        box = actor.box_at(index)
        window = None if box is None else box_window(box, c.width, c.height)
        if window is not None:
            rows, cols, mask = window
            canvas[rows, cols][mask] = colors[id(actor)]
    if script.noise_sigma > 0:
        rng = rng_mod.stream(script.seed, rng_mod.STAGE_SYNTH, index)
        levels = rng.integers(0, 256, size=(c.height, c.width, 3), dtype=np.uint8)
        canvas += noise_table(script.noise_sigma)[levels]
    frame = np.clip(canvas, 0, 255).astype(np.uint8)
    radius, passes = script.blur
    if radius > 0:
        frame = box_blur(frame, radius, passes)
    annotations = []
    for actor in script.actors:
        box = actor.box_at(index)
        if box is not None:
            annotations.append(Annotation(actor.class_id, box, index))
    return frame, annotations


def iter_video(script: SceneScript, video_id: str = "") -> Iterator[tuple[np.ndarray, list[Annotation]]]:
    colors = {id(a): a.color() for a in script.actors}
    for index in range(script.canvas.frame_count):
        frame, annotations = render_frame(script, index, colors)
        if video_id:
            annotations = [Annotation(a.class_id, a.box, a.frame_index, video_id) for a in annotations]
        yield frame, annotations


def render_video(script: SceneScript, video_id: str = "") -> tuple[list[np.ndarray], list[Annotation]]:
    """Render every frame. Returns the RGB frames and all annotations."""
    frames: list[np.ndarray] = []
    annotations: list[Annotation] = []
    for frame, anns in iter_video(script, video_id):
        frames.append(frame)
        annotations.extend(anns)
    return frames, annotations


# Preset timing in frames at 25 fps: 30 s total, staff walks during 12 s - 16.4 s.
PRESET_FRAMES = 750
PRESET_MOTION = (300, 410)


def _zigzag(start: tuple[float, float], first: int, last: int, dx: float, dy: float, leg: int):
    """Keyframes for constant |dx|, |dy| per frame with dy flipping every ``leg`` frames."""
    x, y = start
    keys = [(first, x, y)]
    f = first
    sign = 1.0
    while f < last:
        step = min(leg, last - f)
        x += dx * step
        y += sign * dy * step
        f += step
        keys.append((f, x, y))
        sign = -sign
    return keys


def preset_icu_scene(seed: int = 0) -> SceneScript:
    """A 30 s, 640x400 at 25 fps bedside scene.

    Bed, patient and two devices stay put. One staff member stands beside the
    bed, walks along it in a shallow zigzag between frames 300 and 410, then
    stands still again. ``seed`` drives the sensor noise and actor tints.
    """
    canvas = VideoMeta(fps=25.0, width=640, height=400, frame_count=PRESET_FRAMES)
    end = PRESET_FRAMES - 1

    def static(name, box, intensity, k):
        return Actor(CLASS_IDS[name], ((0, box), (end, box)), intensity, seed * 16 + k)

    bed = static("bed", OrientedBox(330, 312, 400, 130, 0.03), 105, 1)
    patient = static("patient", OrientedBox(325, 312, 260, 70, 0.05), 170, 2)
    device_a = static("devices", OrientedBox(55, 320, 60, 110, 0.0), 200, 3)
    device_b = static("devices", OrientedBox(600, 300, 55, 95, -0.12), 140, 4)

    start, stop = PRESET_MOTION
    size = (110.0, 210.0, 0.0)
    path = _zigzag((100.0, 114.0), start, stop, dx=4.0, dy=4.0, leg=6)
    staff_keys = [(0, OrientedBox(path[0][1], path[0][2], *size))]
    staff_keys += [(f, OrientedBox(x, y, *size)) for f, x, y in path]
    staff_keys.append((end, OrientedBox(path[-1][1], path[-1][2], *size)))
    staff = Actor(CLASS_IDS["staff"], tuple(staff_keys), 245, seed * 16 + 5)

    return SceneScript(
        canvas=canvas,
        actors=(bed, patient, device_a, device_b, staff),
        noise_sigma=3.0,
        blur=(BLUR_RADIUS, BLUR_PASSES),
        seed=seed,
        background=10,
        motion_interval=PRESET_MOTION,
    )
