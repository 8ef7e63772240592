"""Event stream containers and the EVT1 binary event-file format.

An event stream is a time-ordered list of brightness-change events from a
sensor of known geometry. Each event carries a timestamp in microseconds,
a pixel coordinate, and a polarity (+1 brightness increase, -1 decrease).
Streams may additionally contain tail padding records (``valid=False``)
introduced by length normalization; padding never contributes to any
downstream histogram.

EVT1 layout (all little-endian):

    offset  size  field
    0       4     magic b"EVT1"
    4       4     version u32 (currently 1)
    8       2     sensor_width u16
    10      2     sensor_height u16
    12      4     reserved u32 (written as 0, ignored on read)
    16      8     count u64
    24      16*n  records

    record: t_us u64 @0, x u16 @8, y u16 @10, polarity u8 @12
            (1 = +1, 0 = -1), 3 pad bytes @13

File length must equal ``24 + 16 * count``. Timestamps must be
non-decreasing and coordinates in bounds; violations raise DataError with
a stable ``code`` and the byte offset of the offending record.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DataError

EVT1_MAGIC = b"EVT1"
EVT1_VERSION = 1
EVT1_HEADER_SIZE = 24
EVT1_RECORD_SIZE = 16


class EventRecord(NamedTuple):
    t: int
    x: int
    y: int
    polarity: int
    valid: bool


@dataclass
class EventStream:
    """Ordered events from one sensor, stored as parallel numpy arrays."""

    sensor_width: int
    sensor_height: int
    t: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    x: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    polarity: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    valid: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __post_init__(self):
        n = len(self.t)
        for name in ("x", "y", "polarity", "valid"):
            if len(getattr(self, name)) != n:
                raise DataError(f"field {name!r} has length {len(getattr(self, name))}, expected {n}")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.valid))

    @property
    def degenerate(self) -> bool:
        """True for an all-padding stream (no valid events)."""
        return len(self) > 0 and self.n_valid == 0

    def record(self, i: int) -> EventRecord:
        return EventRecord(
            int(self.t[i]), int(self.x[i]), int(self.y[i]),
            int(self.polarity[i]), bool(self.valid[i]),
        )

    def check(self) -> None:
        """Validate the stream invariants over its valid records."""
        v = self.valid
        if not np.all(np.isin(self.polarity[v], (-1, 1))):
            raise DataError("polarity must be +1 or -1", code="bad_polarity")
        if np.any(self.x[v] < 0) or np.any(self.x[v] >= self.sensor_width) \
                or np.any(self.y[v] < 0) or np.any(self.y[v] >= self.sensor_height):
            raise DataError("event coordinates outside sensor geometry", code="out_of_bounds")
        tv = self.t[v]
        if len(tv) > 1 and np.any(np.diff(tv) < 0):
            raise DataError("timestamps must be non-decreasing", code="nonmonotonic_timestamp")

    def slice(self, start: int, stop: int) -> "EventStream":
        return EventStream(
            self.sensor_width, self.sensor_height,
            self.t[start:stop], self.x[start:stop], self.y[start:stop],
            self.polarity[start:stop], self.valid[start:stop],
        )


def from_arrays(sensor_width, sensor_height, t, x, y, polarity) -> EventStream:
    """Build an all-valid stream from plain arrays/lists."""
    t = np.asarray(t, dtype=np.int64)
    return EventStream(
        int(sensor_width), int(sensor_height),
        t,
        np.asarray(x, dtype=np.int64),
        np.asarray(y, dtype=np.int64),
        np.asarray(polarity, dtype=np.int64),
        np.ones(len(t), dtype=bool),
    )


def write_evt1(stream: EventStream, path) -> None:
    """Serialize the valid records of ``stream`` to an EVT1 file."""
    stream.check()
    keep = stream.valid
    t = stream.t[keep].astype(np.uint64)
    x = stream.x[keep].astype(np.uint16)
    y = stream.y[keep].astype(np.uint16)
    pol = (stream.polarity[keep] > 0).astype(np.uint8)
    n = len(t)

    records = np.zeros(n, dtype=_record_dtype())
    records["t"] = t
    records["x"] = x
    records["y"] = y
    records["polarity"] = pol
    header = struct.pack(
        "<4sIHHIQ", EVT1_MAGIC, EVT1_VERSION,
        stream.sensor_width, stream.sensor_height, 0, n,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(records.tobytes())


def _record_dtype():
    return np.dtype({
        "names": ["t", "x", "y", "polarity"],
        "formats": ["<u8", "<u2", "<u2", "u1"],
        "offsets": [0, 8, 10, 12],
        "itemsize": EVT1_RECORD_SIZE,
    })


def read_evt1(path) -> EventStream:
    """Read and validate an EVT1 file into an EventStream.

    Raises DataError with codes: bad_magic, bad_version, truncated,
    trailing_bytes, bad_polarity, out_of_bounds, nonmonotonic_timestamp.
    """
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < EVT1_HEADER_SIZE:
        raise DataError(
            f"file too short for EVT1 header ({len(blob)} bytes)",
            code="truncated", offset=len(blob))
    magic, version, width, height, _reserved, count = struct.unpack_from("<4sIHHIQ", blob, 0)
    if magic != EVT1_MAGIC:
        raise DataError(f"bad magic {magic!r}", code="bad_magic", offset=0)
    if version != EVT1_VERSION:
        raise DataError(f"unsupported EVT1 version {version}", code="bad_version", offset=4)
    expected = EVT1_HEADER_SIZE + EVT1_RECORD_SIZE * count
    if len(blob) < expected:
        raise DataError(
            f"file truncated: expected {expected} bytes for {count} records, got {len(blob)}",
            code="truncated", offset=len(blob))
    if len(blob) > expected:
        raise DataError(
            f"trailing bytes after {count} records", code="trailing_bytes", offset=expected)

    raw = np.frombuffer(blob, dtype=_record_dtype(), count=count, offset=EVT1_HEADER_SIZE)
    pol_raw = raw["polarity"]
    bad = np.nonzero(pol_raw > 1)[0]
    if len(bad):
        i = int(bad[0])
        raise DataError(
            f"record {i}: polarity byte {int(pol_raw[i])} not in {{0,1}}",
            code="bad_polarity", offset=EVT1_HEADER_SIZE + EVT1_RECORD_SIZE * i + 12)
    x = raw["x"].astype(np.int64)
    y = raw["y"].astype(np.int64)
    oob = np.nonzero((x >= width) | (y >= height))[0]
    if len(oob):
        i = int(oob[0])
        raise DataError(
            f"record {i}: coordinate ({int(x[i])},{int(y[i])}) outside {width}x{height}",
            code="out_of_bounds", offset=EVT1_HEADER_SIZE + EVT1_RECORD_SIZE * i + 8)
    t = raw["t"].astype(np.int64)
    if count > 1:
        drop = np.nonzero(np.diff(t) < 0)[0]
        if len(drop):
            i = int(drop[0]) + 1
            raise DataError(
                f"record {i}: timestamp {int(t[i])} < previous {int(t[i - 1])}",
                code="nonmonotonic_timestamp",
                offset=EVT1_HEADER_SIZE + EVT1_RECORD_SIZE * i)

    polarity = np.where(pol_raw == 1, 1, -1).astype(np.int64)
    return EventStream(
        int(width), int(height), t, x, y, polarity, np.ones(count, dtype=bool))
