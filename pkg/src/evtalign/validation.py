"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .streams import EventStream


def check_event_streams(X) -> list[EventStream]:
    """Validate a sequence of event streams with shared sensor geometry."""
    streams = list(X)
    if not streams:
        raise DataError("expected at least one event stream")
    for i, stream in enumerate(streams):
        if not isinstance(stream, EventStream):
            raise DataError(f"X[{i}] is {type(stream).__name__}, expected EventStream")
        stream.check()
    first = streams[0]
    for i, stream in enumerate(streams):
        if (stream.sensor_width, stream.sensor_height) != (first.sensor_width, first.sensor_height):
            raise DataError(
                f"X[{i}] sensor geometry {stream.sensor_width}x{stream.sensor_height} "
                f"differs from X[0] ({first.sensor_width}x{first.sensor_height})")
    return streams


def check_images(images, n: int, size: int) -> np.ndarray:
    """Validate paired images as (n, size, size, 3) uint8-range values."""
    arr = np.asarray(images)
    if arr.shape != (n, size, size, 3):
        raise DataError(
            f"images must have shape {(n, size, size, 3)}, got {arr.shape}")
    if arr.min() < 0 or arr.max() > 255:
        raise DataError("image intensities must lie in [0, 255]")
    return arr


def check_labels(y, n: int) -> np.ndarray:
    arr = np.asarray(y)
    if arr.shape != (n,):
        raise DataError(f"y must have shape ({n},), got {arr.shape}")
    return arr
