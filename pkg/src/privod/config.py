"""One JSON document holding every pipeline default.

Example (all keys optional, unknown keys rejected)::

    {
      "seed": 0,
      "threads": 1,
      "blur": {"radius": 6, "passes": 1},
      "encoder": {"motion_threshold": 15, "confidence_floor": 0.25,
                  "p_use_bitmap": 0.5, "p_discard_all": 0.2,
                  "p_jitter_box": 0.6, "jitter_max": 10.0},
      "clips": {"threshold": 2.0, "pad_seconds": 10.0, "stride": 1, "fps": 25.0},
      "eval": {"iou_threshold": 0.5, "conf_threshold": 0.25, "cm_iou_threshold": 0.45},
      "split": {"fractions": [0.7, 0.15, 0.15], "group_by_video": false}
    }
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

from privod.errors import FormatError


@dataclass
class BlurConfig:
    radius: int = 6
    passes: int = 1

    def validate(self):
        if self.radius < 0 or self.passes < 1:
            raise ValueError(f"blur needs radius >= 0 and passes >= 1, got {self}")


@dataclass
class EncoderConfig:
    motion_threshold: int = 15
    confidence_floor: float = 0.25
    p_use_bitmap: float = 0.5
    p_discard_all: float = 0.2
    p_jitter_box: float = 0.6
    jitter_max: float = 10.0

    def validate(self):
        if not 0 <= self.motion_threshold <= 255:
            raise ValueError(f"motion_threshold must be in [0, 255], got {self.motion_threshold}")
        for name in ("confidence_floor", "p_use_bitmap", "p_discard_all", "p_jitter_box"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {getattr(self, name)}")
        if self.jitter_max < 0:
            raise ValueError(f"jitter_max must be >= 0, got {self.jitter_max}")


@dataclass
class ClipsConfig:
    threshold: float = 2.0
    pad_seconds: float = 10.0
    stride: int = 1
    fps: float = 25.0

    def validate(self):
        if self.pad_seconds < 0 or self.stride < 1 or not self.fps > 0:
            raise ValueError(f"clips needs pad_seconds >= 0, stride >= 1, fps > 0, got {self}")


@dataclass
class EvalConfig:
    iou_threshold: float = 0.5
    conf_threshold: float = 0.25
    cm_iou_threshold: float = 0.45

    def validate(self):
        for name in ("iou_threshold", "conf_threshold", "cm_iou_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {getattr(self, name)}")


@dataclass
class SplitConfig:
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    group_by_video: bool = False

    def validate(self):
        from privod.dataset import check_fractions

        self.fractions = check_fractions(self.fractions)


@dataclass
class PipelineConfig:
    seed: int = 0
    threads: int = 1
    blur: BlurConfig = field(default_factory=BlurConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    clips: ClipsConfig = field(default_factory=ClipsConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    split: SplitConfig = field(default_factory=SplitConfig)

    def validate(self) -> PipelineConfig:
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        for section in (self.blur, self.encoder, self.clips, self.eval, self.split):
            section.validate()
        return self

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["split"]["fractions"] = list(doc["split"]["fractions"])
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> PipelineConfig:
        if not isinstance(doc, dict):
            raise FormatError("config must be a JSON object")
        kwargs = _fields(cls, doc, "config")
        for name, sub in (("blur", BlurConfig), ("encoder", EncoderConfig), ("clips", ClipsConfig),
                          ("eval", EvalConfig), ("split", SplitConfig)):
            if name in kwargs:
                if not isinstance(kwargs[name], dict):
                    raise FormatError(f"config section {name!r} must be an object")
                kwargs[name] = sub(**_fields(sub, kwargs[name], name))
        if "split" in kwargs:
            kwargs["split"].fractions = tuple(kwargs["split"].fractions)
        try:
            return cls(**kwargs).validate()
        except (TypeError, ValueError) as exc:
            raise FormatError(f"invalid config: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> PipelineConfig:
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise FormatError(f"config is not valid JSON: {exc}") from None


def _fields(cls, doc: dict, where: str) -> dict:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise FormatError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return dict(doc)


def load_config(path: str | os.PathLike | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    with open(path, encoding="utf-8") as fp:
        return PipelineConfig.from_json(fp.read())


def save_config(config: PipelineConfig, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(config.to_json())
