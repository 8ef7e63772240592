import { execFileSync, spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { beforeAll, describe, expect, it } from "vitest";

const ROOT = fileURLToPath(new URL("..", import.meta.url));
const CLI = path.join(ROOT, "dist", "cli.js");
const FIXTURES = path.join(ROOT, "fixtures");
const GOLDEN_EVT = path.join(FIXTURES, "goldens", "golden.evt1");
const GOLDEN_EFR = path.join(FIXTURES, "goldens", "golden.efr1");

function run(args: string[]) {
  const proc = spawnSync("node", [CLI, ...args], { encoding: "utf-8" });
  return { code: proc.status, out: proc.stdout, err: proc.stderr };
}

beforeAll(() => {
  if (!fs.existsSync(CLI)) {
    execFileSync("npx", ["tsc"], { cwd: ROOT });
  }
});

describe("evt-ingest CLI", () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "cli-test-"));

  it("ingests the golden fixture and verifies it", () => {
    const out = path.join(dir, "golden.efr1");
    const ingest = run([GOLDEN_EVT, "--out", out, "--events-total", "64", "--events-per-frame", "16"]);
    expect(ingest.code).toBe(0);
    expect(ingest.out).toContain("wrote");

    const same = run(["verify", out, GOLDEN_EFR]);
    expect(same.code).toBe(0);
    expect(same.out).toContain("identical");
  });

  it("verify exits 1 with the mismatch offset on differing files", () => {
    const mutated = path.join(dir, "mutated.efr1");
    const blob = Buffer.from(fs.readFileSync(GOLDEN_EFR));
    blob[blob.length - 1] ^= 0xff;
    fs.writeFileSync(mutated, blob);
    const result = run(["verify", GOLDEN_EFR, mutated]);
    expect(result.code).toBe(1);
    expect(result.out).toContain("offset");
  });

  it("unknown flags exit 1 with usage", () => {
    const result = run([GOLDEN_EVT, "--frobnicate"]);
    expect(result.code).toBe(1);
    expect(result.err).toContain("usage");
  });

  it("malformed input exits 1 with the error code", () => {
    const out = path.join(dir, "never.efr1");
    const bad = path.join(FIXTURES, "malformed", "bad_magic.evt1");
    const result = run([bad, "--out", out, "--events-total", "8", "--events-per-frame", "4"]);
    expect(result.code).toBe(1);
    expect(result.err).toContain("bad_magic");
  });

  it("indivisible config exits 1", () => {
    const out = path.join(dir, "never2.efr1");
    const result = run([GOLDEN_EVT, "--out", out, "--events-total", "7", "--events-per-frame", "2"]);
    expect(result.code).toBe(1);
    expect(result.err).toContain("divisible");
  });

  it("missing input file exits 2 (runtime)", () => {
    const out = path.join(dir, "never3.efr1");
    const result = run(["/nope/missing.evt1", "--out", out, "--events-total", "8", "--events-per-frame", "4"]);
    expect(result.code).toBe(2);
  });
});
