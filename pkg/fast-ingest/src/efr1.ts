/**
 * EFR1 frame-tensor files (little-endian):
 *
 *   0  magic "EFR1"
 *   4  version u32 (= 1)
 *   8  T u32
 *   12 H u32
 *   16 W u32
 *   20 C u32 (= 3)
 *   24 T*H*W*C uint8 intensities, row-major
 */

import * as fs from "node:fs";

import { IngestError } from "./errors.js";

export const EFR1_MAGIC = 0x31524645; // "EFR1" as LE u32
export const EFR1_VERSION = 1;
export const EFR1_HEADER_SIZE = 24;

export interface Efr1Header {
  frames: number;
  height: number;
  width: number;
  channels: number;
}

export function encodeHeader(h: Efr1Header): Buffer {
  const buf = Buffer.alloc(EFR1_HEADER_SIZE);
  buf.writeUInt32LE(EFR1_MAGIC, 0);
  buf.writeUInt32LE(EFR1_VERSION, 4);
  buf.writeUInt32LE(h.frames, 8);
  buf.writeUInt32LE(h.height, 12);
  buf.writeUInt32LE(h.width, 16);
  buf.writeUInt32LE(h.channels, 20);
  return buf;
}

export function parseEfr1Header(buffer: Buffer): Efr1Header {
  if (buffer.length < EFR1_HEADER_SIZE) {
    throw new IngestError(
      `file too short for EFR1 header (${buffer.length} bytes)`,
      "truncated",
      buffer.length,
    );
  }
  if (buffer.readUInt32LE(0) !== EFR1_MAGIC) {
    const seen = buffer.subarray(0, 4).toString("latin1");
    throw new IngestError(`bad magic ${JSON.stringify(seen)}`, "bad_magic", 0);
  }
  const version = buffer.readUInt32LE(4);
  if (version !== EFR1_VERSION) {
    throw new IngestError(`unsupported EFR1 version ${version}`, "bad_version", 4);
  }
  return {
    frames: buffer.readUInt32LE(8),
    height: buffer.readUInt32LE(12),
    width: buffer.readUInt32LE(16),
    channels: buffer.readUInt32LE(20),
  };
}

export interface VerifyResult {
  equal: boolean;
  /** First differing byte offset when not equal. */
  mismatchOffset?: number;
  detail?: string;
}

/**
 * Byte-level comparison of two EFR1 files.
 *
 * Headers must parse and agree field-for-field; payloads must be
 * byte-identical. The first mismatching byte offset is reported.
 */
export function verify(pathA: string, pathB: string): VerifyResult {
  const a = fs.readFileSync(pathA);
  const b = fs.readFileSync(pathB);
  const headerA = parseEfr1Header(a);
  const headerB = parseEfr1Header(b);
  for (const key of ["frames", "height", "width", "channels"] as const) {
    if (headerA[key] !== headerB[key]) {
      return {
        equal: false,
        detail: `incompatible headers: ${key} ${headerA[key]} vs ${headerB[key]}`,
      };
    }
  }
  const n = Math.min(a.length, b.length);
  for (let i = 0; i < n; i += 1) {
    if (a[i] !== b[i]) {
      return { equal: false, mismatchOffset: i, detail: `byte ${i}: ${a[i]} vs ${b[i]}` };
    }
  }
  if (a.length !== b.length) {
    return { equal: false, mismatchOffset: n, detail: `length ${a.length} vs ${b.length}` };
  }
  return { equal: true };
}
