"""Reproducible per-frame random streams.

Every random draw in the package comes from a Philox counter-based generator
keyed by ``(seed, stage, frame index)``::

    rng = stream(seed, "encode", index)

``stage`` is a short label naming the pipeline step. It is hashed with CRC-32
into the spawn key, so the streams of different stages and frames are
independent of one another and of processing order. Frames can therefore be
handled in parallel or out of order and still draw identical numbers.
"""

from __future__ import annotations

import zlib

import numpy as np

STAGE_ENCODE = "encode"
STAGE_SYNTH = "synth"


def stage_key(stage: str) -> int:
    return zlib.crc32(stage.encode("utf-8"))


def stream(seed: int, stage: str, index: int = 0) -> np.random.Generator:
    if seed < 0 or index < 0:
        raise ValueError(f"seed and index must be non-negative, got seed={seed}, index={index}")
    seq = np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=(stage_key(stage), int(index)))
    return np.random.Generator(np.random.Philox(seq))
