/**
 * Array-level bindings to the loopeval metric toolkit.
 *
 * Every function here delegates to the core command-line tool through its
 * public interfaces (LTEN tensor files in, JSON reports out); nothing is
 * reimplemented, so bound results are bit-identical to the CLI's.  The core
 * command defaults to `python3 -m loopeval.cli` and can be overridden with
 * the LOOPEVAL_BIN environment variable (whitespace-separated argv prefix).
 *
 * Shapes are validated strictly at this boundary; there is no broadcasting.
 * Values cross the boundary as float32 (the LTEN payload type).
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { readLten, writeLten } from "./lten";

export { readLten, writeLten } from "./lten";
export type { Tensor } from "./lten";

/** A dense row-major matrix handed across the boundary. */
export interface MatrixView {
  data: ArrayLike<number>;
  rows: number;
  cols: number;
}

export interface InceptionScoreResult {
  mean: number;
  std: number;
  splitScores: number[];
}

export interface DiversityResult {
  ndb: number;
  ndbOverK: number;
  jsd: number;
}

function checkMatrix(name: string, m: MatrixView): void {
  if (!Number.isInteger(m.rows) || m.rows < 1) {
    throw new Error(`${name}.rows must be a positive integer, got ${m.rows}`);
  }
  if (!Number.isInteger(m.cols) || m.cols < 1) {
    throw new Error(`${name}.cols must be a positive integer, got ${m.cols}`);
  }
  if (m.data.length !== m.rows * m.cols) {
    throw new Error(
      `${name}.data has length ${m.data.length}, expected rows*cols = ${m.rows * m.cols}`
    );
  }
  for (let i = 0; i < m.data.length; i++) {
    if (!Number.isFinite(m.data[i])) {
      throw new Error(`${name}.data[${i}] is not finite`);
    }
  }
}

function coreCommand(): string[] {
  const override = process.env.LOOPEVAL_BIN;
  if (override && override.trim().length > 0) {
    return override.trim().split(/\s+/);
  }
  return ["python3", "-m", "loopeval.cli"];
}

function runCore(args: string[]): void {
  const [exe, ...prefix] = coreCommand();
  const proc = spawnSync(exe, [...prefix, ...args], { encoding: "utf-8" });
  if (proc.error) {
    throw new Error(`failed to launch loopeval core (${exe}): ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    throw new Error(
      `loopeval core exited with ${proc.status}: ${proc.stderr.trim() || proc.stdout.trim()}`
    );
  }
}

function withWorkdir<T>(fn: (dir: string) => T): T {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "loopeval-bind-"));
  try {
    return fn(dir);
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

function readReport(reportPath: string): Record<string, unknown> {
  return JSON.parse(fs.readFileSync(reportPath, "utf-8")) as Record<string, unknown>;
}

/**
 * Inception score of an N x C posterior matrix.
 *
 * Rows are renormalized by the core under its 1e-3 tolerance rule; rows
 * further from summing to 1 are rejected.
 */
export function inceptionScore(
  posteriors: MatrixView,
  splits = 10,
  seed = 0
): InceptionScoreResult {
  checkMatrix("posteriors", posteriors);
  if (posteriors.cols < 2) {
    throw new Error(`posteriors.cols must be >= 2 (got ${posteriors.cols} classes)`);
  }
  return withWorkdir((dir) => {
    const file = path.join(dir, "posteriors.lten");
    const report = path.join(dir, "report.json");
    writeLten(file, posteriors.data, [posteriors.rows, posteriors.cols]);
    runCore([
      "eval", "--metrics", "is", "--posteriors", file,
      "--splits", String(splits), "--seed", String(seed), "--report", report,
    ]);
    const doc = readReport(report);
    const params = doc.parameters as Record<string, unknown>;
    return {
      mean: doc.is_mean as number,
      std: doc.is_std as number,
      splitScores: params.is_split_scores as number[],
    };
  });
}

/**
 * Frechet distance between Gaussian fits of two embedding matrices
 * (rows are observations; the two matrices must share their column count).
 */
export function frechetDistance(real: MatrixView, fake: MatrixView): number {
  checkMatrix("real", real);
  checkMatrix("fake", fake);
  if (real.cols !== fake.cols) {
    throw new Error(`embedding dims differ: real.cols=${real.cols}, fake.cols=${fake.cols}`);
  }
  return withWorkdir((dir) => {
    const realFile = path.join(dir, "real.lten");
    const fakeFile = path.join(dir, "fake.lten");
    const report = path.join(dir, "report.json");
    writeLten(realFile, real.data, [real.rows, real.cols]);
    writeLten(fakeFile, fake.data, [fake.rows, fake.cols]);
    runCore([
      "eval", "--real", realFile, "--fake", fakeFile,
      "--metrics", "fad", "--report", report,
    ]);
    return readReport(report).fad as number;
  });
}

/**
 * Diversity of `fake` rows against bins clustered from `real` rows:
 * k-means fit on real, per-bin two-proportion z-tests at `alpha`, plus JSD
 * between the bin-occupancy histograms.
 */
export function diversity(
  real: MatrixView,
  fake: MatrixView,
  k = 100,
  alpha = 0.05,
  seed = 0
): DiversityResult {
  checkMatrix("real", real);
  checkMatrix("fake", fake);
  if (real.cols !== fake.cols) {
    throw new Error(`vector dims differ: real.cols=${real.cols}, fake.cols=${fake.cols}`);
  }
  if (!Number.isInteger(k) || k < 2) {
    throw new Error(`k must be an integer >= 2, got ${k}`);
  }
  return withWorkdir((dir) => {
    const realFile = path.join(dir, "real.lten");
    const fakeFile = path.join(dir, "fake.lten");
    const report = path.join(dir, "report.json");
    writeLten(realFile, real.data, [real.rows, real.cols]);
    writeLten(fakeFile, fake.data, [fake.rows, fake.cols]);
    runCore([
      "eval", "--real", realFile, "--fake", fakeFile, "--metrics", "ndb,jsd",
      "--k", String(k), "--alpha", String(alpha), "--seed", String(seed),
      "--report", report,
    ]);
    const doc = readReport(report);
    return {
      ndb: doc.ndb as number,
      ndbOverK: doc.ndb_over_k as number,
      jsd: doc.jsd as number,
    };
  });
}

/** Jensen-Shannon divergence (base 2) between two count vectors. */
export function jsd(p: ArrayLike<number>, q: ArrayLike<number>): number {
  if (p.length !== q.length) {
    throw new Error(`count vectors differ in length: p=${p.length}, q=${q.length}`);
  }
  if (p.length < 1) {
    throw new Error("count vectors must be non-empty");
  }
  return withWorkdir((dir) => {
    const pFile = path.join(dir, "p.lten");
    const qFile = path.join(dir, "q.lten");
    const report = path.join(dir, "report.json");
    writeLten(pFile, p, [p.length]);
    writeLten(qFile, q, [q.length]);
    runCore(["jsd", "--p", pFile, "--q", qFile, "--report", report]);
    return readReport(report).jsd as number;
  });
}

/**
 * Mel-statistics embedding of one 80 x 320 log-mel matrix: per-band means
 * (80) followed by per-band standard deviations (80).
 */
export function melstatEmbed(mel: MatrixView): Float64Array {
  checkMatrix("mel", mel);
  if (mel.rows !== 80 || mel.cols !== 320) {
    throw new Error(`mel must be 80 x 320, got ${mel.rows} x ${mel.cols}`);
  }
  return withWorkdir((dir) => {
    const melFile = path.join(dir, "mel.lten");
    const outFile = path.join(dir, "embedding.lten");
    writeLten(melFile, mel.data, [mel.rows, mel.cols]);
    runCore(["embed", "--input", melFile, "--out", outFile]);
    const tensor = readLten(outFile);
    if (tensor.shape.length !== 2 || tensor.shape[0] !== 1 || tensor.shape[1] !== 160) {
      throw new Error(`core returned embedding shape [${tensor.shape}], expected [1, 160]`);
    }
    return tensor.data;
  });
}
