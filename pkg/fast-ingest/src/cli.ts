#!/usr/bin/env node
/**
 * evt-ingest — EVT1 to EFR1 conversion and EFR1 comparison.
 *
 * Usage:
 *   evt-ingest <in.evt1> --out <out.efr1> --events-total P --events-per-frame Q
 *   evt-ingest verify <a.efr1> <b.efr1>
 *
 * Exit codes mirror the reference CLI: 0 success, 1 validation error
 * (bad flags, malformed input, config problems), 2 runtime error. For
 * `verify`, differing files exit 1 with the first mismatch offset on
 * stdout.
 */

import { verify } from "./efr1.js";
import { IngestError } from "./errors.js";
import { ingestToFile } from "./ingest.js";

const USAGE = `usage:
  evt-ingest <in.evt1> --out <out.efr1> --events-total P --events-per-frame Q
  evt-ingest verify <a.efr1> <b.efr1>`;

function fail(message: string): never {
  process.stderr.write(`evt-ingest: error: ${message}\n${USAGE}\n`);
  process.exit(1);
}

function runVerify(args: string[]): number {
  if (args.length !== 2) {
    fail("verify takes exactly two files");
  }
  const result = verify(args[0], args[1]);
  if (result.equal) {
    process.stdout.write("identical\n");
    return 0;
  }
  const where = result.mismatchOffset === undefined ? "" : ` at offset ${result.mismatchOffset}`;
  process.stdout.write(`different${where}: ${result.detail ?? ""}\n`);
  return 1;
}

function runIngest(args: string[]): number {
  let input: string | undefined;
  let output: string | undefined;
  let eventsTotal: number | undefined;
  let eventsPerFrame: number | undefined;

  for (let i = 0; i < args.length; i += 1) {
    const arg = args[i];
    const next = () => {
      i += 1;
      if (i >= args.length) {
        fail(`missing value for ${arg}`);
      }
      return args[i];
    };
    if (arg === "--out") {
      output = next();
    } else if (arg === "--events-total") {
      eventsTotal = Number(next());
    } else if (arg === "--events-per-frame") {
      eventsPerFrame = Number(next());
    } else if (arg.startsWith("--")) {
      fail(`unknown flag ${arg}`);
    } else if (input === undefined) {
      input = arg;
    } else {
      fail(`unexpected argument ${arg}`);
    }
  }
  if (!input || !output || eventsTotal === undefined || eventsPerFrame === undefined) {
    fail("input, --out, --events-total, and --events-per-frame are required");
  }
  const header = ingestToFile(input, output, { eventsTotal, eventsPerFrame });
  process.stdout.write(
    `wrote ${output}: ${eventsTotal / eventsPerFrame} x ` +
      `${header.sensorHeight}x${header.sensorWidth}x3 from ${header.count} events\n`,
  );
  return 0;
}

export function main(argv: string[]): number {
  try {
    if (argv.length === 0) {
      fail("missing arguments");
    }
    if (argv[0] === "verify") {
      return runVerify(argv.slice(1));
    }
    return runIngest(argv);
  } catch (err) {
    if (err instanceof IngestError) {
      process.stderr.write(`evt-ingest: error [${err.code}]: ${err.message}\n`);
      return err.code === "io_error" ? 2 : 1;
    }
    process.stderr.write(`evt-ingest: runtime error: ${(err as Error).message}\n`);
    return 2;
  }
}

process.exit(main(process.argv.slice(2)));
