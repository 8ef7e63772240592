#!/usr/bin/env python3
"""Generate frozen test fixtures.

Run once from the repository root; outputs are committed. Produces:

* tests/fixtures/golden.evt1 + golden.efr1 + golden_resized.npy — the
  reference stream and its frame tensors (pre- and post-resize).
* fast-ingest/fixtures/fuzz/NNN.evt1 + NNN.efr1 — 100 random EVT1 files
  with the reference pipeline's pre-resize output, for differential
  testing of the high-throughput reader.
* fast-ingest/fixtures/malformed/*.evt1 + manifest.json — crafted bad
  files with their expected parser error codes.
* fast-ingest/fixtures/goldens — copies of the golden pair plus their
  conversion parameters.
"""

import json
import os
import struct
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from evtalign.frames import RepresentationConfig, events_to_frames, events_to_frames_raw, write_efr1
from evtalign.streams import from_arrays, write_evt1

ROOT = os.path.join(os.path.dirname(__file__), "..")
PRIMARY_FIXTURES = os.path.join(ROOT, "tests", "fixtures")
SECONDARY_FIXTURES = os.path.join(ROOT, "fast-ingest", "fixtures")


def random_stream(rng, max_events=400, max_sensor=24):
    width = int(rng.integers(4, max_sensor + 1))
    height = int(rng.integers(4, max_sensor + 1))
    n = int(rng.integers(0, max_events + 1))
    t = np.sort(rng.integers(0, 1_000_000, size=n))
    return from_arrays(
        width, height, t,
        rng.integers(0, width, size=n),
        rng.integers(0, height, size=n),
        rng.choice([-1, 1], size=n))


def golden_pair():
    os.makedirs(PRIMARY_FIXTURES, exist_ok=True)
    rng = np.random.default_rng(20240817)
    stream = random_stream(rng, max_events=0)
    # fixed, hand-reproducible stream: 96 events on a 16x16 sensor
    n = 96
    t = np.sort(rng.integers(0, 50_000, size=n))
    stream = from_arrays(
        16, 16, t,
        rng.integers(0, 16, size=n), rng.integers(0, 16, size=n),
        rng.choice([-1, 1], size=n))
    cfg = RepresentationConfig(total_events=64, events_per_frame=16, target_resolution=8)

    write_evt1(stream, os.path.join(PRIMARY_FIXTURES, "golden.evt1"))
    raw = events_to_frames_raw(stream, cfg)
    write_efr1(raw, os.path.join(PRIMARY_FIXTURES, "golden.efr1"))
    resized = events_to_frames(stream, cfg)
    np.save(os.path.join(PRIMARY_FIXTURES, "golden_resized.npy"), resized.values)
    return stream, cfg


def fuzz_corpus():
    out = os.path.join(SECONDARY_FIXTURES, "fuzz")
    os.makedirs(out, exist_ok=True)
    rng = np.random.default_rng(917)
    manifest = []
    for i in range(100):
        stream = random_stream(rng)
        q = int(rng.choice([8, 16, 32]))
        t_frames = int(rng.integers(1, 5))
        cfg = RepresentationConfig(
            total_events=q * t_frames, events_per_frame=q,
            target_resolution=stream.sensor_height)
        evt_path = os.path.join(out, f"{i:03d}.evt1")
        efr_path = os.path.join(out, f"{i:03d}.efr1")
        write_evt1(stream, evt_path)
        write_efr1(events_to_frames_raw(stream, cfg), efr_path)
        manifest.append({
            "evt1": f"fuzz/{i:03d}.evt1",
            "efr1": f"fuzz/{i:03d}.efr1",
            "events_total": cfg.total_events,
            "events_per_frame": cfg.events_per_frame,
        })
    with open(os.path.join(SECONDARY_FIXTURES, "fuzz_manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)


def header(width=8, height=8, count=0, magic=b"EVT1", version=1):
    return struct.pack("<4sIHHIQ", magic, version, width, height, 0, count)


def record(t=0, x=0, y=0, pol=1):
    return struct.pack("<QHHB3x", t, x, y, pol)


def malformed_corpus():
    out = os.path.join(SECONDARY_FIXTURES, "malformed")
    os.makedirs(out, exist_ok=True)
    cases = {
        "bad_magic.evt1": (header(magic=b"NOPE"), "bad_magic"),
        "bad_version.evt1": (header(version=2), "bad_version"),
        "truncated_header.evt1": (b"EVT1\x01\x00", "truncated"),
        "truncated_mid_record.evt1": (header(count=2) + record(t=5) + record(t=9)[:9], "truncated"),
        "count_overstates.evt1": (header(count=4) + record() * 2, "truncated"),
        "trailing_bytes.evt1": (header(count=1) + record() + b"\xff\xff", "trailing_bytes"),
        "nonmonotonic.evt1": (header(count=3) + record(t=5) + record(t=9) + record(t=2), "nonmonotonic_timestamp"),
        "x_out_of_bounds.evt1": (header(width=4, height=8, count=1) + record(x=4), "out_of_bounds"),
        "y_out_of_bounds.evt1": (header(width=8, height=4, count=1) + record(y=7), "out_of_bounds"),
        "bad_polarity.evt1": (header(count=2) + record(pol=1) + record(t=1, pol=9), "bad_polarity"),
    }
    manifest = {}
    for name, (blob, code) in cases.items():
        with open(os.path.join(out, name), "wb") as f:
            f.write(blob)
        manifest[f"malformed/{name}"] = code
    with open(os.path.join(SECONDARY_FIXTURES, "malformed_manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)


def secondary_goldens(stream, cfg):
    out = os.path.join(SECONDARY_FIXTURES, "goldens")
    os.makedirs(out, exist_ok=True)
    write_evt1(stream, os.path.join(out, "golden.evt1"))
    write_efr1(events_to_frames_raw(stream, cfg), os.path.join(out, "golden.efr1"))
    with open(os.path.join(out, "golden_params.json"), "w") as f:
        json.dump({"events_total": cfg.total_events,
                   "events_per_frame": cfg.events_per_frame}, f)


def main():
    stream, cfg = golden_pair()
    fuzz_corpus()
    malformed_corpus()
    secondary_goldens(stream, cfg)
    print("fixtures written")


if __name__ == "__main__":
    main()
