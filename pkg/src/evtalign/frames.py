"""Event stream to colorized frame-tensor conversion.

Pipeline: normalize the stream length to ``P`` events (truncate or pad),
group every ``Q`` consecutive events into ``T = P/Q`` parts, count positive
and negative events per pixel into per-part histograms, colorize the two
count channels with fixed color maps, and resize each frame bilinearly to
the target resolution.

Color maps are applied per pixel as

    frame = clamp(pos_count * (0,255,255) + neg_count * (255,255,0), 0, 255)

so a pixel with no events stays (0,0,0) and intensities saturate at 255.
Everything up to (and excluding) the resize is integer arithmetic and
bit-exact by construction; the resize kernel is bilinear with half-pixel
centers (``align_corners=False``) and no antialias filter.

EFR1 layout (little-endian) stores the pre-resize uint8 tensor:

    offset  size       field
    0       4          magic b"EFR1"
    4       4          version u32 (currently 1)
    8       4          T u32
    12      4          H u32
    16      4          W u32
    20      4          C u32 (always 3)
    24      T*H*W*C    uint8 intensities, row-major
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import torch

from .errors import ConfigError, DataError
from .streams import EventStream

EFR1_MAGIC = b"EFR1"
EFR1_VERSION = 1
EFR1_HEADER_SIZE = 24

# Column vectors from the colorization rule: positive counts scale the
# first map, negative counts the second.
POSITIVE_COLOR = np.array([0, 255, 255], dtype=np.int64)
NEGATIVE_COLOR = np.array([255, 255, 0], dtype=np.int64)


@dataclass(frozen=True)
class RepresentationConfig:
    """Stream-to-frames settings: P events total, Q per frame, T = P/Q."""

    total_events: int
    events_per_frame: int
    target_resolution: int = 224

    def __post_init__(self):
        if self.total_events < 1:
            raise ConfigError(f"total_events must be >= 1, got {self.total_events}")
        if self.events_per_frame < 1:
            raise ConfigError(f"events_per_frame must be >= 1, got {self.events_per_frame}")
        if self.total_events % self.events_per_frame != 0:
            raise ConfigError(
                f"total_events ({self.total_events}) must be divisible by "
                f"events_per_frame ({self.events_per_frame})")
        if self.target_resolution < 1:
            raise ConfigError(f"target_resolution must be >= 1, got {self.target_resolution}")

    @property
    def frame_count(self) -> int:
        return self.total_events // self.events_per_frame


@dataclass
class Histogram:
    """Per-frame event counts, shape (T, H, W, 2): channel 0 positive, 1 negative."""

    values: np.ndarray

    @property
    def total_count(self) -> int:
        return int(self.values.sum())


@dataclass
class FrameTensor:
    """Colorized event frames, shape (T, H, W, 3).

    Pre-resize tensors are uint8 in [0, 255]; resized tensors are float64.
    """

    values: np.ndarray
    resized: bool = False

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def normalize_stream(stream: EventStream, total_events: int) -> EventStream:
    """Fix the stream length to exactly ``total_events`` records.

    Longer streams keep their first ``total_events`` events; shorter ones
    get invalid padding records appended at the tail. An empty input
    yields an all-padding stream (``degenerate`` is True on the result).
    """
    if total_events < 1:
        raise ConfigError(f"total_events must be >= 1, got {total_events}")
    n = len(stream)
    if n >= total_events:
        return stream.slice(0, total_events)
    pad = total_events - n
    return EventStream(
        stream.sensor_width, stream.sensor_height,
        np.concatenate([stream.t, np.zeros(pad, dtype=np.int64)]),
        np.concatenate([stream.x, np.zeros(pad, dtype=np.int64)]),
        np.concatenate([stream.y, np.zeros(pad, dtype=np.int64)]),
        np.concatenate([stream.polarity, np.ones(pad, dtype=np.int64)]),
        np.concatenate([stream.valid, np.zeros(pad, dtype=bool)]),
    )


def partition_stream(stream: EventStream, events_per_frame: int) -> list[EventStream]:
    """Split into consecutive parts of exactly ``events_per_frame`` records."""
    if events_per_frame < 1:
        raise ConfigError(f"events_per_frame must be >= 1, got {events_per_frame}")
    n = len(stream)
    if n % events_per_frame != 0:
        raise ConfigError(
            f"stream length {n} not divisible by events_per_frame {events_per_frame}")
    return [
        stream.slice(i, i + events_per_frame)
        for i in range(0, n, events_per_frame)
    ]


def build_histograms(parts: list[EventStream], height: int, width: int) -> Histogram:
    """Count valid events per pixel and polarity for each part.

    values[t, y, x, 0] counts positive events, channel 1 negative ones.
    Padding records contribute nothing.
    """
    values = np.zeros((len(parts), height, width, 2), dtype=np.int64)
    for t, part in enumerate(parts):
        v = part.valid
        bad = np.nonzero(v & ((part.x < 0) | (part.x >= width) | (part.y < 0) | (part.y >= height)))[0]
        if len(bad):
            i = int(bad[0])
            rec = part.record(i)
            raise DataError(
                f"part {t}, record {i}: event at ({rec.x},{rec.y}) outside {width}x{height}",
                code="out_of_bounds")
        channel = (part.polarity[v] < 0).astype(np.int64)  # 0 = positive, 1 = negative
        np.add.at(values[t], (part.y[v], part.x[v], channel), 1)
    return Histogram(values)


def colorize(hist: Histogram) -> FrameTensor:
    """Map count histograms to 8-bit frames via the fixed color maps."""
    pos = hist.values[..., 0:1]
    neg = hist.values[..., 1:2]
    frame = pos * POSITIVE_COLOR + neg * NEGATIVE_COLOR
    frame = np.clip(frame, 0, 255).astype(np.uint8)
    return FrameTensor(frame, resized=False)


def resize_frames(frames: FrameTensor, target: int) -> FrameTensor:
    """Resize each frame to target x target, bilinear, half-pixel centers."""
    if target < 1:
        raise ConfigError(f"target_resolution must be >= 1, got {target}")
    values = frames.values.astype(np.float64)
    x = torch.from_numpy(values).permute(0, 3, 1, 2)  # (T, 3, H, W)
    y = torch.nn.functional.interpolate(
        x, size=(target, target), mode="bilinear",
        align_corners=False, antialias=False)
    out = y.permute(0, 2, 3, 1).contiguous().numpy()
    return FrameTensor(out, resized=True)


def events_to_frames(stream: EventStream, cfg: RepresentationConfig) -> FrameTensor:
    """Full pipeline: normalize -> partition -> histogram -> colorize -> resize."""
    normalized = normalize_stream(stream, cfg.total_events)
    parts = partition_stream(normalized, cfg.events_per_frame)
    hist = build_histograms(parts, stream.sensor_height, stream.sensor_width)
    return resize_frames(colorize(hist), cfg.target_resolution)


def events_to_frames_raw(stream: EventStream, cfg: RepresentationConfig) -> FrameTensor:
    """Pipeline up to the bit-exact pre-resize stage (uint8 frames)."""
    normalized = normalize_stream(stream, cfg.total_events)
    parts = partition_stream(normalized, cfg.events_per_frame)
    return colorize(build_histograms(parts, stream.sensor_height, stream.sensor_width))


def write_efr1(frames: FrameTensor, path) -> None:
    """Serialize a pre-resize frame tensor to an EFR1 file."""
    if frames.resized or frames.values.dtype != np.uint8:
        raise DataError("EFR1 stores pre-resize uint8 frames only")
    t, h, w, c = frames.values.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIIIII", EFR1_MAGIC, EFR1_VERSION, t, h, w, c))
        f.write(np.ascontiguousarray(frames.values).tobytes())


def read_efr1(path) -> FrameTensor:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < EFR1_HEADER_SIZE:
        raise DataError(
            f"file too short for EFR1 header ({len(blob)} bytes)",
            code="truncated", offset=len(blob))
    magic, version, t, h, w, c = struct.unpack_from("<4sIIIII", blob, 0)
    if magic != EFR1_MAGIC:
        raise DataError(f"bad magic {magic!r}", code="bad_magic", offset=0)
    if version != EFR1_VERSION:
        raise DataError(f"unsupported EFR1 version {version}", code="bad_version", offset=4)
    expected = EFR1_HEADER_SIZE + t * h * w * c
    if len(blob) != expected:
        code = "truncated" if len(blob) < expected else "trailing_bytes"
        raise DataError(
            f"EFR1 payload length mismatch: expected {expected} bytes, got {len(blob)}",
            code=code, offset=min(len(blob), expected))
    values = np.frombuffer(blob, dtype=np.uint8, offset=EFR1_HEADER_SIZE).reshape(t, h, w, c)
    return FrameTensor(values.copy(), resized=False)
