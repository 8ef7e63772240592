/**
 * Streaming EVT1 decoder.
 *
 * Layout (little-endian):
 *   header, 24 bytes:
 *     0  magic "EVT1"
 *     4  version u32 (= 1)
 *     8  sensor_width u16
 *     10 sensor_height u16
 *     12 reserved u32 (ignored)
 *     16 count u64
 *   records, 16 bytes each:
 *     0  t_us u64
 *     8  x u16
 *     10 y u16
 *     12 polarity u8 (1 = +1, 0 = -1)
 *     13 3 pad bytes
 *
 * File length must be exactly 24 + 16 * count. Records are validated as
 * they stream past: polarity byte in {0, 1}, coordinates inside the
 * sensor, timestamps non-decreasing. Validation failures carry a stable
 * error code and the byte offset of the offending field.
 *
 * Decoding is chunked: the whole file is never resident, and timestamps
 * are compared as (hi, lo) u32 pairs so the hot loop stays BigInt-free.
 */

import * as fs from "node:fs";

import { IngestError } from "./errors.js";

export const EVT1_MAGIC = 0x31545645; // "EVT1" read as LE u32
export const EVT1_VERSION = 1;
export const HEADER_SIZE = 24;
export const RECORD_SIZE = 16;

export interface Evt1Header {
  sensorWidth: number;
  sensorHeight: number;
  count: number;
}

export interface EventRecord {
  /** Timestamp in microseconds; safe up to 2^53-1. */
  t: number;
  x: number;
  y: number;
  /** +1 or -1. */
  polarity: number;
}

export function parseHeader(buffer: Buffer): Evt1Header {
  if (buffer.length < HEADER_SIZE) {
    throw new IngestError(
      `file too short for EVT1 header (${buffer.length} bytes)`,
      "truncated",
      buffer.length,
    );
  }
  if (buffer.readUInt32LE(0) !== EVT1_MAGIC) {
    const seen = buffer.subarray(0, 4).toString("latin1");
    throw new IngestError(`bad magic ${JSON.stringify(seen)}`, "bad_magic", 0);
  }
  const version = buffer.readUInt32LE(4);
  if (version !== EVT1_VERSION) {
    throw new IngestError(`unsupported EVT1 version ${version}`, "bad_version", 4);
  }
  const count = buffer.readBigUInt64LE(16);
  if (count > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new IngestError(`record count ${count} too large`, "truncated", 16);
  }
  return {
    sensorWidth: buffer.readUInt16LE(8),
    sensorHeight: buffer.readUInt16LE(10),
    count: Number(count),
  };
}

export interface RecordVisitor {
  /** Called once after the header parses. */
  onHeader?(header: Evt1Header): void;
  /** Called for every record, in file order. index is 0-based. */
  onRecord(index: number, t_lo: number, t_hi: number, x: number, y: number, polarity: number): void;
}

/**
 * Decode a file chunk by chunk, validating every record.
 *
 * The visitor receives raw split timestamps (lo/hi u32) so callers that
 * do not need absolute times never touch BigInt.
 */
export function scanFile(path: string, visitor: RecordVisitor, chunkSize = 1 << 20): Evt1Header {
  let fd: number;
  try {
    fd = fs.openSync(path, "r");
  } catch (err) {
    throw new IngestError(`cannot open ${path}: ${(err as Error).message}`, "io_error");
  }
  try {
    const size = fs.fstatSync(fd).size;
    const headerBuf = Buffer.alloc(HEADER_SIZE);
    const got = fs.readSync(fd, headerBuf, 0, HEADER_SIZE, 0);
    if (got < HEADER_SIZE) {
      throw new IngestError(`file too short for EVT1 header (${got} bytes)`, "truncated", got);
    }
    const header = parseHeader(headerBuf);
    const expected = HEADER_SIZE + RECORD_SIZE * header.count;
    if (size < expected) {
      throw new IngestError(
        `file truncated: expected ${expected} bytes for ${header.count} records, got ${size}`,
        "truncated",
        size,
      );
    }
    if (size > expected) {
      throw new IngestError(`trailing bytes after ${header.count} records`, "trailing_bytes", expected);
    }
    visitor.onHeader?.(header);

    const chunk = Buffer.alloc(Math.max(RECORD_SIZE, chunkSize - (chunkSize % RECORD_SIZE)));
    let filePos = HEADER_SIZE;
    let index = 0;
    let prevLo = 0;
    let prevHi = 0;
    const { sensorWidth, sensorHeight, count } = header;

    while (index < count) {
      const want = Math.min(chunk.length, expected - filePos);
      const n = fs.readSync(fd, chunk, 0, want, filePos);
      if (n < want) {
        throw new IngestError("short read", "io_error", filePos + n);
      }
      for (let off = 0; off + RECORD_SIZE <= n; off += RECORD_SIZE) {
        const base = filePos + off;
        const lo = chunk.readUInt32LE(off);
        const hi = chunk.readUInt32LE(off + 4);
        const x = chunk.readUInt16LE(off + 8);
        const y = chunk.readUInt16LE(off + 10);
        const pol = chunk[off + 12];
        if (pol > 1) {
          throw new IngestError(
            `record ${index}: polarity byte ${pol} not in {0,1}`,
            "bad_polarity",
            base + 12,
          );
        }
        if (x >= sensorWidth || y >= sensorHeight) {
          throw new IngestError(
            `record ${index}: coordinate (${x},${y}) outside ${sensorWidth}x${sensorHeight}`,
            "out_of_bounds",
            base + 8,
          );
        }
        if (index > 0 && (hi < prevHi || (hi === prevHi && lo < prevLo))) {
          throw new IngestError(
            `record ${index}: timestamp decreases`,
            "nonmonotonic_timestamp",
            base,
          );
        }
        prevLo = lo;
        prevHi = hi;
        visitor.onRecord(index, lo, hi, x, y, pol === 1 ? 1 : -1);
        index += 1;
      }
      filePos += n;
    }
    return header;
  } finally {
    fs.closeSync(fd);
  }
}

/** Materialize a whole file as records (small files / tests only). */
export function parseEvt(path: string): { header: Evt1Header; events: EventRecord[] } {
  const events: EventRecord[] = [];
  const header = scanFile(path, {
    onRecord(_index, lo, hi, x, y, polarity) {
      events.push({ t: hi * 4294967296 + lo, x, y, polarity });
    },
  });
  return { header, events };
}
