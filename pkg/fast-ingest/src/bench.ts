/**
 * Throughput benchmark: synthesize a large EVT1 file, time full ingest
 * (decode + validate + bin + colorize + write), report events/second.
 *
 * Run with `npm run bench`. Writes bench-report.txt next to the package
 * root. The 10M events/s figure is a soft target on desktop hardware.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { performance } from "node:perf_hooks";

import { HEADER_SIZE, RECORD_SIZE } from "./evt1.js";
import { ingestToFile } from "./ingest.js";

const EVENTS = 8_000_000;
const SENSOR = 128;
const RUNS = 3;

function synthesize(eventCount: number, filePath: string): void {
  const header = Buffer.alloc(HEADER_SIZE);
  header.write("EVT1", 0, "latin1");
  header.writeUInt32LE(1, 4);
  header.writeUInt16LE(SENSOR, 8);
  header.writeUInt16LE(SENSOR, 10);
  header.writeBigUInt64LE(BigInt(eventCount), 16);

  const fd = fs.openSync(filePath, "w");
  fs.writeSync(fd, header);
  const batch = 1 << 16;
  const chunk = Buffer.alloc(batch * RECORD_SIZE);
  // cheap xorshift keeps generation out of the bottleneck
  let state = 0x9e3779b9 >>> 0;
  const rand = () => {
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    state >>>= 0;
    return state;
  };
  let written = 0;
  let t = 0;
  while (written < eventCount) {
    const n = Math.min(batch, eventCount - written);
    for (let i = 0; i < n; i += 1) {
      const off = i * RECORD_SIZE;
      t += rand() & 3;
      chunk.writeUInt32LE(t >>> 0, off);
      chunk.writeUInt32LE(0, off + 4);
      chunk.writeUInt16LE(rand() % SENSOR, off + 8);
      chunk.writeUInt16LE(rand() % SENSOR, off + 10);
      chunk[off + 12] = rand() & 1;
    }
    fs.writeSync(fd, chunk.subarray(0, n * RECORD_SIZE));
    written += n;
  }
  fs.closeSync(fd);
}

function main(): void {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "evt-bench-"));
  const evtPath = path.join(dir, "bench.evt1");
  const efrPath = path.join(dir, "bench.efr1");
  synthesize(EVENTS, evtPath);

  const rates: number[] = [];
  for (let run = 0; run < RUNS; run += 1) {
    const start = performance.now();
    ingestToFile(evtPath, efrPath, { eventsTotal: EVENTS, eventsPerFrame: EVENTS / 4 });
    const seconds = (performance.now() - start) / 1000;
    rates.push(EVENTS / seconds);
  }
  const best = Math.max(...rates);
  const lines = [
    `events: ${EVENTS}`,
    `sensor: ${SENSOR}x${SENSOR}, frames: 4`,
    ...rates.map((r, i) => `run ${i + 1}: ${(r / 1e6).toFixed(2)} M events/s`),
    `best: ${(best / 1e6).toFixed(2)} M events/s`,
    `soft target (10 M events/s): ${best >= 10e6 ? "met" : "missed"}`,
  ];
  const report = lines.join("\n") + "\n";
  process.stdout.write(report);
  fs.writeFileSync(new URL("../bench-report.txt", import.meta.url), report);
  fs.rmSync(dir, { recursive: true, force: true });
}

main();
