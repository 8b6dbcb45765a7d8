"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numbers

import numpy as np


def check_frame(frame, channels: int | None = None) -> np.ndarray:
    """Coerce ``frame`` to a ``uint8`` array of shape ``(H, W)`` or ``(H, W, 3)``.

    Float or wider integer input is accepted only when every value is an
    integer in ``[0, 255]``.

    Raises:
        ValueError: on wrong rank, channel count, empty size or out-of-range
            samples.
    """
    arr = np.asarray(frame)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise ValueError(f"frame must be (H, W) or (H, W, 3), got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"frame must be non-empty, got shape {arr.shape}")
    n_channels = 1 if arr.ndim == 2 else 3
    if channels is not None and n_channels != channels:
        raise ValueError(f"expected a {channels}-channel frame, got {n_channels} channel(s)")
    if arr.dtype != np.uint8:
        if arr.dtype.kind not in "iuf":
            raise ValueError(f"frame dtype must be numeric, got {arr.dtype}")
        if arr.size and (arr.min() < 0 or arr.max() > 255 or np.any(arr != np.round(arr))):
            raise ValueError("frame samples must be integers in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def check_video(frames, channels: int | None = None) -> np.ndarray:
    """Stack a sequence of frames into ``(N, H, W)`` or ``(N, H, W, 3)``."""
    if isinstance(frames, np.ndarray) and frames.dtype == np.uint8 and frames.ndim in (3, 4):
        arr = frames
        if arr.ndim == 4 and arr.shape[3] == 1:
            arr = arr[..., 0]
        if arr.ndim == 4 and arr.shape[3] != 3:
            raise ValueError(f"video must be (N, H, W) or (N, H, W, 3), got {arr.shape}")
        if arr.shape[0]:
            check_frame(arr[0], channels=channels)
        return arr
    checked = [check_frame(f, channels=channels) for f in frames]
    if not checked:
        raise ValueError("video contains no frames")
    for f in checked[1:]:
        check_same_shape(checked[0], f)
    return np.stack(checked)


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")


def check_probability(name: str, value) -> float:
    if not isinstance(value, numbers.Real) or not 0.0 <= float(value) <= 1.0:
        raise ValueError(f"{name} must be a probability in [0, 1], got {value!r}")
    return float(value)


def check_nonnegative(name: str, value) -> float:
    if not isinstance(value, numbers.Real) or not float(value) >= 0.0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return float(value)
