import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { EFR1_HEADER_SIZE, parseEfr1Header, verify } from "../src/efr1.js";
import { IngestError } from "../src/errors.js";
import { HEADER_SIZE, RECORD_SIZE } from "../src/evt1.js";
import { ingestToFile, validateConfig } from "../src/ingest.js";

const FIXTURES = fileURLToPath(new URL("../fixtures", import.meta.url));

interface FuzzEntry {
  evt1: string;
  efr1: string;
  events_total: number;
  events_per_frame: number;
}

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "ingest-test-"));
}

function makeEvt1(
  events: Array<[number, number, number, number]>,
  width = 8,
  height = 8,
): string {
  const headerBuf = Buffer.alloc(HEADER_SIZE);
  headerBuf.write("EVT1", 0, "latin1");
  headerBuf.writeUInt32LE(1, 4);
  headerBuf.writeUInt16LE(width, 8);
  headerBuf.writeUInt16LE(height, 10);
  headerBuf.writeBigUInt64LE(BigInt(events.length), 16);
  const body = Buffer.alloc(events.length * RECORD_SIZE);
  events.forEach(([t, x, y, pol], i) => {
    const off = i * RECORD_SIZE;
    body.writeBigUInt64LE(BigInt(t), off);
    body.writeUInt16LE(x, off + 8);
    body.writeUInt16LE(y, off + 10);
    body[off + 12] = pol;
  });
  const p = path.join(tmpdir(), "in.evt1");
  fs.writeFileSync(p, Buffer.concat([headerBuf, body]));
  return p;
}

describe("validateConfig", () => {
  it("accepts divisible settings and returns the frame count", () => {
    expect(validateConfig({ eventsTotal: 8, eventsPerFrame: 2 })).toBe(4);
  });

  it("rejects indivisible or non-positive settings", () => {
    for (const cfg of [
      { eventsTotal: 6, eventsPerFrame: 4 },
      { eventsTotal: 0, eventsPerFrame: 1 },
      { eventsTotal: 8, eventsPerFrame: 0 },
    ]) {
      expect(() => validateConfig(cfg)).toThrowError(IngestError);
    }
  });
});

describe("ingestToFile", () => {
  it("writes the header shape forced by the config", () => {
    const input = makeEvt1([[0, 1, 1, 1]], 32, 32);
    const out = path.join(tmpdir(), "out.efr1");
    ingestToFile(input, out, { eventsTotal: 8, eventsPerFrame: 2 });
    const header = parseEfr1Header(fs.readFileSync(out));
    expect(header).toEqual({ frames: 4, height: 32, width: 32, channels: 3 });
  });

  it("empty stream yields an all-zero payload", () => {
    const input = makeEvt1([], 4, 4);
    const out = path.join(tmpdir(), "zero.efr1");
    ingestToFile(input, out, { eventsTotal: 4, eventsPerFrame: 2 });
    const blob = fs.readFileSync(out);
    expect(blob.length).toBe(EFR1_HEADER_SIZE + 2 * 4 * 4 * 3);
    expect(blob.subarray(EFR1_HEADER_SIZE).every((b) => b === 0)).toBe(true);
  });

  it("applies the color maps with saturation", () => {
    // one +1 at (1,0), two -1 at (2,1), one of each at (3,3) in frame 0
    const input = makeEvt1(
      [
        [0, 1, 0, 1],
        [1, 2, 1, 0],
        [2, 2, 1, 0],
        [3, 3, 3, 1],
        [4, 3, 3, 0],
      ],
      4,
      4,
    );
    const out = path.join(tmpdir(), "color.efr1");
    ingestToFile(input, out, { eventsTotal: 5, eventsPerFrame: 5 });
    const pixels = fs.readFileSync(out).subarray(EFR1_HEADER_SIZE);
    const at = (x: number, y: number) => [
      pixels[(y * 4 + x) * 3],
      pixels[(y * 4 + x) * 3 + 1],
      pixels[(y * 4 + x) * 3 + 2],
    ];
    expect(at(1, 0)).toEqual([0, 255, 255]); // positive map
    expect(at(2, 1)).toEqual([255, 255, 0]); // negative map, count 2 clamps
    expect(at(3, 3)).toEqual([255, 255, 255]); // both polarities
    expect(at(0, 0)).toEqual([0, 0, 0]);
  });

  it("truncates to the first events-total events but validates the tail", () => {
    const input = makeEvt1(
      [
        [0, 0, 0, 1],
        [1, 1, 1, 1],
        [2, 2, 2, 1],
        [3, 3, 3, 1],
      ],
      4,
      4,
    );
    const out = path.join(tmpdir(), "trunc.efr1");
    ingestToFile(input, out, { eventsTotal: 2, eventsPerFrame: 2 });
    const pixels = fs.readFileSync(out).subarray(EFR1_HEADER_SIZE);
    // events 2 and 3 fall past the normalized length: their pixels stay black
    expect(pixels[(2 * 4 + 2) * 3 + 1]).toBe(0);
    expect(pixels[(0 * 4 + 0) * 3 + 1]).toBe(255);
  });

  it("rejects malformed input past the truncation point", () => {
    const blobPath = makeEvt1(
      [
        [5, 0, 0, 1],
        [9, 1, 1, 1],
        [2, 2, 2, 1], // timestamp goes backwards after the kept prefix
      ],
      4,
      4,
    );
    const out = path.join(tmpdir(), "badtail.efr1");
    expect(() => ingestToFile(blobPath, out, { eventsTotal: 2, eventsPerFrame: 1 })).toThrowError(
      /timestamp/,
    );
  });
});

describe("differential equivalence against the reference pipeline", () => {
  const manifest: FuzzEntry[] = JSON.parse(
    fs.readFileSync(path.join(FIXTURES, "fuzz_manifest.json"), "utf-8"),
  );

  it("has the full 100-file corpus", () => {
    expect(manifest).toHaveLength(100);
  });

  it("matches the reference output byte for byte on every fuzz file", () => {
    const out = path.join(tmpdir(), "fuzz.efr1");
    for (const entry of manifest) {
      ingestToFile(path.join(FIXTURES, entry.evt1), out, {
        eventsTotal: entry.events_total,
        eventsPerFrame: entry.events_per_frame,
      });
      const result = verify(out, path.join(FIXTURES, entry.efr1));
      expect(result.equal, `${entry.evt1}: ${result.detail ?? ""}`).toBe(true);
    }
  });

  it("matches the golden fixture", () => {
    const params = JSON.parse(
      fs.readFileSync(path.join(FIXTURES, "goldens", "golden_params.json"), "utf-8"),
    );
    const out = path.join(tmpdir(), "golden.efr1");
    ingestToFile(path.join(FIXTURES, "goldens", "golden.evt1"), out, {
      eventsTotal: params.events_total,
      eventsPerFrame: params.events_per_frame,
    });
    expect(verify(out, path.join(FIXTURES, "goldens", "golden.efr1")).equal).toBe(true);
  });
});

describe("verify", () => {
  it("a file equals itself", () => {
    const golden = path.join(FIXTURES, "goldens", "golden.efr1");
    expect(verify(golden, golden).equal).toBe(true);
  });

  it("one flipped byte is reported with its offset", () => {
    const golden = path.join(FIXTURES, "goldens", "golden.efr1");
    const blob = Buffer.from(fs.readFileSync(golden));
    const victim = EFR1_HEADER_SIZE + 37;
    blob[victim] = blob[victim] === 0 ? 255 : 0;
    const mutated = path.join(tmpdir(), "mutated.efr1");
    fs.writeFileSync(mutated, blob);
    const result = verify(golden, mutated);
    expect(result.equal).toBe(false);
    expect(result.mismatchOffset).toBe(victim);
  });

  it("incompatible headers are reported without an offset", () => {
    const a = path.join(tmpdir(), "a.efr1");
    const b = path.join(tmpdir(), "b.efr1");
    const inputA = makeEvt1([[0, 0, 0, 1]], 4, 4);
    const inputB = makeEvt1([[0, 0, 0, 1]], 8, 8);
    ingestToFile(inputA, a, { eventsTotal: 2, eventsPerFrame: 1 });
    ingestToFile(inputB, b, { eventsTotal: 2, eventsPerFrame: 1 });
    const result = verify(a, b);
    expect(result.equal).toBe(false);
    expect(result.detail).toContain("incompatible headers");
  });
});
