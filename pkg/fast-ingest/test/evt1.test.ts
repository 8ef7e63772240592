import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { IngestError } from "../src/errors.js";
import { HEADER_SIZE, RECORD_SIZE, parseEvt, scanFile } from "../src/evt1.js";

const FIXTURES = fileURLToPath(new URL("../fixtures", import.meta.url));

function header(opts: { width?: number; height?: number; count?: number } = {}): Buffer {
  const buf = Buffer.alloc(HEADER_SIZE);
  buf.write("EVT1", 0, "latin1");
  buf.writeUInt32LE(1, 4);
  buf.writeUInt16LE(opts.width ?? 8, 8);
  buf.writeUInt16LE(opts.height ?? 8, 10);
  buf.writeBigUInt64LE(BigInt(opts.count ?? 0), 16);
  return buf;
}

function record(t: number, x: number, y: number, pol: number): Buffer {
  const buf = Buffer.alloc(RECORD_SIZE);
  buf.writeBigUInt64LE(BigInt(t), 0);
  buf.writeUInt16LE(x, 8);
  buf.writeUInt16LE(y, 10);
  buf[12] = pol;
  return buf;
}

function tempFile(name: string, blob: Buffer): string {
  const p = path.join(fs.mkdtempSync("/tmp/evt1-test-"), name);
  fs.writeFileSync(p, blob);
  return p;
}

describe("parseEvt", () => {
  it("reads an empty valid file as an empty stream", () => {
    const p = tempFile("empty.evt1", header());
    const { header: h, events } = parseEvt(p);
    expect(h.count).toBe(0);
    expect(h.sensorWidth).toBe(8);
    expect(events).toHaveLength(0);
  });

  it("decodes records with correct values and polarity mapping", () => {
    const blob = Buffer.concat([
      header({ width: 16, height: 12, count: 3 }),
      record(100, 3, 4, 1),
      record(250, 15, 11, 0),
      record(250, 0, 0, 1),
    ]);
    const p = tempFile("vals.evt1", blob);
    const { events } = parseEvt(p);
    expect(events).toEqual([
      { t: 100, x: 3, y: 4, polarity: 1 },
      { t: 250, x: 15, y: 11, polarity: -1 },
      { t: 250, x: 0, y: 0, polarity: 1 },
    ]);
  });

  it("handles 64-bit timestamps beyond 2^32 microseconds", () => {
    const big = 2 ** 40 + 17;
    const blob = Buffer.concat([header({ count: 1 }), record(big, 1, 1, 1)]);
    const { events } = parseEvt(tempFile("big.evt1", blob));
    expect(events[0].t).toBe(big);
  });

  it("streams chunk boundaries without corrupting records", () => {
    const n = 1000;
    const parts = [header({ width: 64, height: 64, count: n })];
    for (let i = 0; i < n; i += 1) {
      parts.push(record(i, i % 64, (i * 7) % 64, i & 1));
    }
    const p = tempFile("chunky.evt1", Buffer.concat(parts));
    // tiny chunk size forces many boundary crossings
    const seen: number[] = [];
    scanFile(
      p,
      {
        onRecord(index, lo) {
          seen.push(lo);
          expect(lo).toBe(index);
        },
      },
      RECORD_SIZE * 3,
    );
    expect(seen).toHaveLength(n);
  });
});

describe("malformed corpus", () => {
  const manifest: Record<string, string> = JSON.parse(
    fs.readFileSync(path.join(FIXTURES, "malformed_manifest.json"), "utf-8"),
  );

  it("covers ten crafted files", () => {
    expect(Object.keys(manifest)).toHaveLength(10);
  });

  for (const [rel, code] of Object.entries(manifest)) {
    it(`rejects ${path.basename(rel)} with code ${code}`, () => {
      expect.assertions(2);
      try {
        parseEvt(path.join(FIXTURES, rel));
      } catch (err) {
        expect(err).toBeInstanceOf(IngestError);
        expect((err as IngestError).code).toBe(code);
      }
    });
  }

  it("truncation errors carry the byte offset", () => {
    const blob = Buffer.concat([header({ count: 2 }), record(1, 0, 0, 1)]).subarray(0, 30);
    const p = tempFile("trunc.evt1", Buffer.from(blob));
    try {
      parseEvt(p);
      throw new Error("should have thrown");
    } catch (err) {
      expect((err as IngestError).code).toBe("truncated");
      expect((err as IngestError).offset).toBe(30);
    }
  });
});
