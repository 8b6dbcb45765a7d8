"""Binary frame I/O: PGM/PPM images and the packed raw stream.

Packed stream layout (all integers little-endian)::

    u32 width | u32 height | u8 channels | frame 0 | frame 1 | ...

Each frame is ``width * height * channels`` bytes, row-major, interleaved when
``channels == 3``. The frame count follows from the payload length, so a
writer can append frames without seeking.
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from privod.errors import FormatError
from privod.raster import DEFAULT_FPS, Frame
from privod.validation import check_frame

HEADER = struct.Struct("<IIB")


def frame_nbytes(width: int, height: int, channels: int) -> int:
    return width * height * channels


def read_header(fp: BinaryIO) -> tuple[int, int, int]:
    raw = fp.read(HEADER.size)
    if len(raw) < HEADER.size:
        raise FormatError(f"truncated stream header ({len(raw)} of {HEADER.size} bytes)", "byte offset 0")
    width, height, channels = HEADER.unpack(raw)
    if width == 0:
        raise FormatError("width must be > 0", "byte offset 0")
    if height == 0:
        raise FormatError("height must be > 0", "byte offset 4")
    if channels not in (1, 3):
        raise FormatError(f"channels must be 1 or 3, got {channels}", "byte offset 8")
    return width, height, channels


def iter_stream(fp: BinaryIO, fps: float = DEFAULT_FPS) -> Iterator[Frame]:
    """Yield frames from a packed stream one at a time."""
    width, height, channels = read_header(fp)
    size = frame_nbytes(width, height, channels)
    shape = (height, width) if channels == 1 else (height, width, 3)
    offset = HEADER.size
    index = 0
    while True:
        raw = fp.read(size)
        if not raw:
            return
        if len(raw) < size:
            raise FormatError(
                f"truncated frame {index}: {len(raw)} of {size} bytes", f"byte offset {offset}"
            )
        data = np.frombuffer(raw, dtype=np.uint8).reshape(shape)
        yield Frame(data, index=index, fps=fps)
        offset += size
        index += 1


class StreamWriter:
    """Write frames to a packed stream; the header is emitted with the first frame."""

    def __init__(self, fp: BinaryIO):
        self.fp = fp
        self.shape: tuple[int, ...] | None = None
        self.count = 0

    def write_header(self, width: int, height: int, channels: int) -> None:
        if self.shape is not None:
            raise RuntimeError("header already written")
        self.fp.write(HEADER.pack(width, height, channels))
        self.shape = (height, width) if channels == 1 else (height, width, 3)

    def write(self, frame) -> None:
        data = check_frame(frame)
        if self.shape is None:
            channels = 1 if data.ndim == 2 else 3
            self.write_header(data.shape[1], data.shape[0], channels)
        if data.shape != self.shape:
            raise ValueError(f"frame shape {data.shape} does not match stream shape {self.shape}")
        self.fp.write(np.ascontiguousarray(data).tobytes())
        self.count += 1


def write_stream(fp: BinaryIO, frames: Iterable) -> int:
    writer = StreamWriter(fp)
    for frame in frames:
        writer.write(frame)
    return writer.count


def read_stream(fp: BinaryIO, fps: float = DEFAULT_FPS) -> list[Frame]:
    return list(iter_stream(fp, fps=fps))


def write_pnm(fp: BinaryIO, frame) -> None:
    """Binary PGM (P5) for one channel, PPM (P6) for three."""
    data = check_frame(frame)
    magic = b"P5" if data.ndim == 2 else b"P6"
    fp.write(magic + b"\n%d %d\n255\n" % (data.shape[1], data.shape[0]))
    fp.write(np.ascontiguousarray(data).tobytes())


def _pnm_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PNM header", f"byte offset {pos}")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pnm(fp: BinaryIO) -> np.ndarray:
    buf = fp.read()
    tokens, pos = _pnm_tokens(buf, 4)
    magic, width, height, maxval = tokens
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported PNM magic {magic!r}", "byte offset 0")
    try:
        w, h, m = int(width), int(height), int(maxval)
    except ValueError as exc:
        raise FormatError(f"bad PNM header field: {exc}", "byte offset 0") from None
    if m != 255:
        raise FormatError(f"only 8-bit PNM (maxval 255) supported, got {m}", "byte offset 0")
    channels = 1 if magic == b"P5" else 3
    size = frame_nbytes(w, h, channels)
    raster = buf[pos : pos + size]
    if len(raster) < size:
        raise FormatError(f"truncated raster: {len(raster)} of {size} bytes", f"byte offset {pos}")
    shape = (h, w) if channels == 1 else (h, w, 3)
    return np.frombuffer(raster, dtype=np.uint8).reshape(shape).copy()
