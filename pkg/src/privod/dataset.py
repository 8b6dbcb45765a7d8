"""Class vocabulary, per-frame label/detection files and the train/val/test split.

Label files hold one object per line::

    class_id cx cy w h theta              # <video_id>_<frame_index>.txt
    class_id cx cy w h theta confidence   # <video_id>_<frame_index>.det.txt

Coordinates are absolute pixels, ``theta`` in radians. Blank lines and lines
starting with ``#`` are ignored.
"""

from __future__ import annotations

import hashlib
import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from privod.errors import FormatError
from privod.geometry import OrientedBox
from privod.validation import check_probability

CLASS_NAMES = ("bed", "staff", "devices", "patient")
CLASS_IDS = {name: i for i, name in enumerate(CLASS_NAMES)}
NUM_CLASSES = len(CLASS_NAMES)

LABEL_SUFFIX = ".txt"
DETECTION_SUFFIX = ".det.txt"

SPLITS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)

_KEY_RE = re.compile(r"^(?P<video>.+)_(?P<index>\d+)$")


def class_name(class_id: int) -> str:
    if not 0 <= class_id < NUM_CLASSES:
        raise ValueError(f"unknown class id {class_id}")
    return CLASS_NAMES[class_id]


def class_id(name: str) -> int:
    try:
        return CLASS_IDS[name]
    except KeyError:
        raise ValueError(f"unknown class name {name!r}") from None


@dataclass(frozen=True)
class Annotation:
    class_id: int
    box: OrientedBox
    frame_index: int = 0
    video_id: str = ""

    def __post_init__(self):
        class_name(self.class_id)
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")

    @property
    def frame_key(self) -> str:
        return frame_key(self.video_id, self.frame_index)


@dataclass(frozen=True)
class Detection:
    class_id: int
    box: OrientedBox
    confidence: float
    frame_index: int = 0
    video_id: str = ""

    def __post_init__(self):
        class_name(self.class_id)
        check_probability("confidence", self.confidence)
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")

    @property
    def frame_key(self) -> str:
        return frame_key(self.video_id, self.frame_index)


def frame_key(video_id: str, frame_index: int) -> str:
    return f"{video_id}_{frame_index}"


def parse_frame_key(key: str) -> tuple[str, int]:
    m = _KEY_RE.match(key)
    if not m:
        raise FormatError(f"frame key {key!r} is not <video_id>_<frame_index>")
    return m.group("video"), int(m.group("index"))


def _parse_rows(text: str, ncols: int) -> Iterable[tuple[int, list[str]]]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != ncols:
            raise FormatError(f"expected {ncols} fields, got {len(fields)}", f"line {lineno}")
        yield lineno, fields


def _parse_common(fields: list[str], lineno: int) -> tuple[int, OrientedBox]:
    where = f"line {lineno}"
    try:
        cid = int(fields[0])
    except ValueError:
        raise FormatError(f"class id {fields[0]!r} is not an integer", where) from None
    if not 0 <= cid < NUM_CLASSES:
        raise FormatError(f"unknown class id {cid}", where)
    try:
        values = [float(v) for v in fields[1:6]]
    except ValueError as exc:
        raise FormatError(f"bad number ({exc})", where) from None
    try:
        box = OrientedBox(*values)
    except ValueError as exc:
        raise FormatError(str(exc), where) from None
    return cid, box


def parse_labels(text: str, video_id: str = "", frame_index: int = 0) -> list[Annotation]:
    """Parse a ground-truth label file.

    Raises:
        FormatError: naming the offending line for wrong field counts, bad
            numbers, unknown class ids or degenerate boxes.
    """
    out = []
    for lineno, fields in _parse_rows(text, 6):
        cid, box = _parse_common(fields, lineno)
        out.append(Annotation(cid, box, frame_index, video_id))
    return out


def parse_detections(text: str, video_id: str = "", frame_index: int = 0) -> list[Detection]:
    out = []
    for lineno, fields in _parse_rows(text, 7):
        cid, box = _parse_common(fields, lineno)
        try:
            conf = float(fields[6])
        except ValueError:
            raise FormatError(f"bad confidence {fields[6]!r}", f"line {lineno}") from None
        if not 0.0 <= conf <= 1.0:
            raise FormatError(f"confidence {conf} outside [0, 1]", f"line {lineno}")
        out.append(Detection(cid, box, conf, frame_index, video_id))
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def write_labels(annotations: Sequence[Annotation]) -> str:
    return "".join(
        f"{a.class_id} {' '.join(_fmt(v) for v in a.box.as_tuple())}\n" for a in annotations
    )


def write_detections(detections: Sequence[Detection]) -> str:
    return "".join(
        f"{d.class_id} {' '.join(_fmt(v) for v in d.box.as_tuple())} {_fmt(d.confidence)}\n"
        for d in detections
    )


def _dir_keys(directory: Path, suffix: str, exclude: str | None = None) -> dict[str, Path]:
    keys = {}
    for path in sorted(directory.iterdir()):
        name = path.name
        if not name.endswith(suffix) or (exclude and name.endswith(exclude)):
            continue
        key = name[: -len(suffix)]
        parse_frame_key(key)
        keys[key] = path
    return keys


def label_files(directory: str | os.PathLike) -> dict[str, Path]:
    """Map frame key to label file path for every ``<key>.txt`` in ``directory``."""
    return _dir_keys(Path(directory), LABEL_SUFFIX, exclude=DETECTION_SUFFIX)


def detection_files(directory: str | os.PathLike) -> dict[str, Path]:
    return _dir_keys(Path(directory), DETECTION_SUFFIX)


def read_label_file(path: str | os.PathLike) -> list[Annotation]:
    path = Path(path)
    video, index = parse_frame_key(path.name[: -len(LABEL_SUFFIX)])
    try:
        return parse_labels(path.read_text(encoding="utf-8"), video, index)
    except FormatError as exc:
        raise FormatError(str(exc), str(path)) from None


def read_detection_file(path: str | os.PathLike) -> list[Detection]:
    path = Path(path)
    video, index = parse_frame_key(path.name[: -len(DETECTION_SUFFIX)])
    try:
        return parse_detections(path.read_text(encoding="utf-8"), video, index)
    except FormatError as exc:
        raise FormatError(str(exc), str(path)) from None


def write_label_file(directory: str | os.PathLike, video_id: str, frame_index: int, annotations) -> Path:
    path = Path(directory) / f"{frame_key(video_id, frame_index)}{LABEL_SUFFIX}"
    path.write_text(write_labels(annotations), encoding="utf-8", newline="\n")
    return path


def write_detection_file(directory: str | os.PathLike, video_id: str, frame_index: int, detections) -> Path:
    path = Path(directory) / f"{frame_key(video_id, frame_index)}{DETECTION_SUFFIX}"
    path.write_text(write_detections(detections), encoding="utf-8", newline="\n")
    return path


@dataclass(frozen=True)
class SplitAssignment:
    fractions: tuple[float, float, float]
    seed: int
    assignment: dict[str, str]

    def counts(self) -> dict[str, int]:
        out = dict.fromkeys(SPLITS, 0)
        for split in self.assignment.values():
            out[split] += 1
        return out

    def keys(self, split: str) -> list[str]:
        return [k for k, s in self.assignment.items() if s == split]

    def to_csv(self) -> str:
        rows = ["frame_key,split"]
        rows += [f"{k},{s}" for k, s in self.assignment.items()]
        return "\n".join(rows) + "\n"


def check_fractions(fractions: Sequence[float]) -> tuple[float, float, float]:
    if len(fractions) != 3:
        raise ValueError(f"need 3 split fractions, got {len(fractions)}")
    fr = tuple(float(f) for f in fractions)
    if any(f < 0 or not math.isfinite(f) for f in fr):
        raise ValueError(f"split fractions must be non-negative, got {fr}")
    if abs(sum(fr) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {sum(fr)}")
    return fr  # type: ignore[return-value]


def split_counts(n: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of ``n`` items.

    Each bucket gets ``floor(f * n)``; leftover items go one each to the
    buckets with the largest fractional parts, earlier buckets winning ties.
    Every count is therefore within one item of its exact share.
    """
    exact = [f * n for f in fractions]
    counts = [math.floor(x + 1e-9) for x in exact]
    remainders = [x - c for x, c in zip(exact, counts)]
    order = sorted(range(len(fractions)), key=lambda i: (-round(remainders[i], 9), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def _shuffle_key(seed: int, key: str) -> bytes:
    return hashlib.blake2b(key.encode("utf-8"), digest_size=16, key=str(seed).encode("ascii")).digest()


def split_frames(
    frame_keys: Iterable[str],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    seed: int = 0,
    group_by_video: bool = False,
) -> SplitAssignment:
    """Assign each frame key to train/val/test.

    The shuffle orders items by a keyed BLAKE2b hash of ``(seed, key)``, which
    is independent of input order, platform and library versions. With
    ``group_by_video`` whole videos are apportioned instead of frames, so no
    video contributes frames to two splits.
    """
    fr = check_fractions(fractions)
    keys = sorted(set(frame_keys))
    if group_by_video:
        groups: dict[str, list[str]] = {}
        for k in keys:
            groups.setdefault(parse_frame_key(k)[0], []).append(k)
        units = sorted(groups, key=lambda g: (_shuffle_key(seed, g), g))
    else:
        units = sorted(keys, key=lambda k: (_shuffle_key(seed, k), k))
    counts = split_counts(len(units), fr)
    assignment: dict[str, str] = {}
    pos = 0
    for split, count in zip(SPLITS, counts):
        for unit in units[pos : pos + count]:
            members = groups[unit] if group_by_video else [unit]
            for k in members:
                assignment[k] = split
        pos += count
    return SplitAssignment(fr, seed, dict(sorted(assignment.items())))


def read_manifest(text: str) -> dict[str, str]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "frame_key,split":
        raise FormatError("manifest must start with header 'frame_key,split'", "line 1")
    out = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        key, sep, split = line.strip().rpartition(",")
        if not sep or split not in SPLITS:
            raise FormatError(f"bad manifest row {line!r}", f"line {lineno}")
        out[key] = split
    return out
