"""Synthetic paired event/image dataset of moving shapes.

Each sample simulates one shape instance (square, triangle, disk, cross,
or bar) translating across a small sensor. At every motion step, pixels
the shape newly covers emit +1 events (leading edge) and pixels it leaves
emit -1 events (trailing edge); timestamps advance by one step interval
per frame of motion with a per-event offset in row-major pixel order, so
streams are strictly ordered and generation is byte-reproducible from the
seed. The paired image renders the same shape instance statically at the
midpoint of its trajectory.

On disk a dataset split is a directory of per-sample EVT1 files plus
``images.npy`` (N, H, W, 3 uint8), ``labels.npy`` (N int64), and a
``categories.txt`` vocabulary file (one name per line, index = line).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .streams import EventStream, from_arrays, read_evt1, write_evt1

CATEGORIES = ("square", "triangle", "disk", "cross", "bar")
SENSOR_SIZE = 32
STEP_US = 1000


def _shape_mask(category: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Binary stencil of one shape instance, drawn at a seeded size."""
    half = size // 2
    yy, xx = np.mgrid[-half:half + 1, -half:half + 1]
    if category == "square":
        mask = np.ones_like(xx, dtype=bool)
    elif category == "disk":
        mask = xx * xx + yy * yy <= half * half
    elif category == "triangle":
        # downward-pointing isoceles triangle
        mask = (yy >= -half) & (np.abs(xx) <= (half - yy) / 2.0)
    elif category == "cross":
        arm = max(1, size // 6)
        mask = (np.abs(xx) <= arm) | (np.abs(yy) <= arm)
    elif category == "bar":
        arm = max(1, size // 6)
        horizontal = rng.random() < 0.5
        mask = np.abs(yy) <= arm if horizontal else np.abs(xx) <= arm
    else:
        raise ConfigError(f"unknown shape category {category!r}")
    return mask


def _render(mask: np.ndarray, cx: int, cy: int, sensor: int) -> np.ndarray:
    """Place the stencil at integer center (cx, cy), clipped to the sensor."""
    canvas = np.zeros((sensor, sensor), dtype=bool)
    h, w = mask.shape
    y0, x0 = cy - h // 2, cx - w // 2
    ys0, xs0 = max(0, -y0), max(0, -x0)
    ye = min(h, sensor - y0)
    xe = min(w, sensor - x0)
    if ye > ys0 and xe > xs0:
        canvas[y0 + ys0: y0 + ye, x0 + xs0: x0 + xe] = mask[ys0:ye, xs0:xe]
    return canvas


@dataclass
class Sample:
    stream: EventStream
    image: np.ndarray     # (H, W, 3) uint8
    label: int


@dataclass
class Dataset:
    categories: list[str]
    samples: list[Sample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)


def simulate_sample(category: str, rng: np.random.Generator,
                    sensor: int = SENSOR_SIZE) -> tuple[EventStream, np.ndarray]:
    """One moving-shape instance: its event stream and its paired image."""
    size = int(rng.integers(9, 16))
    mask = _shape_mask(category, size, rng)
    steps = int(rng.integers(18, 27))
    angle = rng.uniform(0, 2 * np.pi)
    speed = rng.uniform(0.8, 1.6)
    dx, dy = speed * np.cos(angle), speed * np.sin(angle)
    # start near the center so the trajectory stays mostly on-sensor
    cx0 = sensor / 2 + rng.uniform(-4, 4) - dx * steps / 2
    cy0 = sensor / 2 + rng.uniform(-4, 4) - dy * steps / 2

    ts, xs, ys, ps = [], [], [], []
    prev = _render(mask, round(cx0), round(cy0), sensor)
    for step in range(1, steps + 1):
        cur = _render(mask, round(cx0 + dx * step), round(cy0 + dy * step), sensor)
        turn_on = cur & ~prev
        turn_off = prev & ~cur
        offset = 0
        for grid, polarity in ((turn_on, 1), (turn_off, -1)):
            py, px = np.nonzero(grid)
            for y, x in zip(py, px):
                ts.append(step * STEP_US + offset)
                xs.append(int(x))
                ys.append(int(y))
                ps.append(polarity)
                offset += 1
        prev = cur
    if not ts:
        raise DataError(f"simulator produced an empty stream for {category!r}")
    order = np.argsort(np.asarray(ts), kind="stable")
    stream = from_arrays(
        sensor, sensor,
        np.asarray(ts)[order], np.asarray(xs)[order],
        np.asarray(ys)[order], np.asarray(ps)[order],
    )

    mid = _render(mask, round(cx0 + dx * steps / 2), round(cy0 + dy * steps / 2), sensor)
    image = np.where(mid[..., None], 255, 0).astype(np.uint8).repeat(3, axis=-1)
    return stream, image


def make_synthetic_dataset(seed: int, categories=CATEGORIES,
                           samples_per_category: int = 40,
                           sensor: int = SENSOR_SIZE) -> Dataset:
    """Deterministic dataset of ``samples_per_category`` instances per class."""
    if len(categories) < 2:
        raise ConfigError("at least two categories are required")
    rng = np.random.default_rng(seed)
    dataset = Dataset(categories=list(categories))
    for label, category in enumerate(categories):
        for _ in range(samples_per_category):
            stream, image = simulate_sample(category, rng, sensor)
            dataset.samples.append(Sample(stream, image, label))
    return dataset


def few_shot_subset(dataset: Dataset, k: int, seed: int) -> Dataset:
    """Exactly k seeded samples per category (shuffle then first k)."""
    if k < 1:
        raise ConfigError(f"few-shot k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    subset = Dataset(categories=list(dataset.categories))
    labels = dataset.labels
    for label in range(len(dataset.categories)):
        indices = np.nonzero(labels == label)[0]
        if len(indices) < k:
            raise ConfigError(
                f"category {dataset.categories[label]!r} has {len(indices)} "
                f"samples, fewer than k={k}")
        chosen = rng.permutation(indices)[:k]
        subset.samples.extend(dataset.samples[i] for i in sorted(chosen))
    return subset


def distinct_category_batches(dataset: Dataset, batch_size: int,
                              rng: np.random.Generator) -> list[np.ndarray]:
    """Index batches in which no category appears twice.

    Per-category sample queues are shuffled and zipped, so every sample
    appears exactly once per epoch (batches shrink when queues run dry).
    The effective batch size is min(batch_size, number of categories).
    """
    labels = dataset.labels
    queues = []
    for label in range(len(dataset.categories)):
        idx = np.nonzero(labels == label)[0]
        queues.append(list(rng.permutation(idx)))
    size = min(batch_size, len(dataset.categories))
    batches = []
    while any(queues):
        live = [q for q in queues if q]
        order = rng.permutation(len(live))[:size]
        batch = np.array([live[i].pop() for i in order], dtype=np.int64)
        batches.append(batch)
    return batches


def shuffled_batches(dataset: Dataset, batch_size: int,
                     rng: np.random.Generator) -> list[np.ndarray]:
    """Plain shuffled batches; duplicate categories per batch possible."""
    order = rng.permutation(len(dataset))
    return [order[i:i + batch_size] for i in range(0, len(order), batch_size)]


def save_dataset(dataset: Dataset, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    events_dir = os.path.join(directory, "events")
    os.makedirs(events_dir, exist_ok=True)
    for i, sample in enumerate(dataset.samples):
        write_evt1(sample.stream, os.path.join(events_dir, f"{i:05d}.evt1"))
    np.save(os.path.join(directory, "images.npy"),
            np.stack([s.image for s in dataset.samples]))
    np.save(os.path.join(directory, "labels.npy"), dataset.labels)
    with open(os.path.join(directory, "categories.txt"), "w") as f:
        f.write("\n".join(dataset.categories) + "\n")


def load_dataset(directory) -> Dataset:
    categories_path = os.path.join(directory, "categories.txt")
    if not os.path.exists(categories_path):
        raise DataError(f"missing categories file {categories_path}")
    with open(categories_path) as f:
        categories = [line.strip() for line in f if line.strip()]
    images = np.load(os.path.join(directory, "images.npy"))
    labels = np.load(os.path.join(directory, "labels.npy"))
    events_dir = os.path.join(directory, "events")
    dataset = Dataset(categories=categories)
    for i in range(len(labels)):
        stream = read_evt1(os.path.join(events_dir, f"{i:05d}.evt1"))
        dataset.samples.append(Sample(stream, images[i], int(labels[i])))
    return dataset
