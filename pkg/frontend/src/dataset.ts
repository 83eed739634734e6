/**
 * Dataset synthesis: (sinogram, DAS input, model-based target) triples.
 *
 * Every image in a directory is pushed through the reconstruction
 * toolkit's own CLI — simulate with the image as the initial-pressure
 * phantom (resized to the grid and normalized by that tool), then
 * delay-and-sum and model-based reconstructions of the noised sinogram.
 * Driving the installed CLI keeps the forward model and the DAS front end
 * bit-for-bit identical to what the inference engine sits behind.
 */

import { execFile } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdirSync, mkdtempSync, readdirSync, rmSync, statSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { Image2d } from "./network.js";
import { readOarrRecord } from "./oarr.js";

const execFileAsync = promisify(execFile);

export interface Matrix {
  rows: number;
  cols: number;
  data: Float64Array;
}

export interface DatasetPair {
  /** Source image file name. */
  name: string;
  /** Noised detector data, detectors x samples. */
  sinogram: Matrix;
  /** Delay-and-sum image of the sinogram; the network input. */
  input: Image2d;
  /** Model-based reconstruction of the sinogram; the training target. */
  target: Image2d;
}

export interface Dataset {
  pairs: DatasetPair[];
  /** SHA-256 over every pair's tensors, in pair order. */
  fingerprint: string;
  grid: number;
}

export interface DatasetOptions {
  imagesDir: string;
  grid?: number;
  noiseStd?: number;
  seed?: number;
  /** Reconstruction CLI argv prefix, e.g. ["oareco"]. */
  command?: string[];
  /** Scratch directory; a temp dir is created (and removed) by default. */
  workDir?: string;
  keepWork?: boolean;
  concurrency?: number;
  warn?: (message: string) => void;
}

export function defaultCommand(): string[] {
  const fromEnv = process.env.OARECO_CMD;
  if (fromEnv && fromEnv.trim() !== "") {
    return fromEnv.trim().split(/\s+/);
  }
  return ["oareco"];
}

async function runCli(command: string[], args: string[]): Promise<void> {
  await execFileAsync(command[0], [...command.slice(1), ...args], {
    maxBuffer: 16 * 1024 * 1024,
  });
}

function firstLine(text: string): string {
  const line = text.split(/\r?\n/).find((l) => l.trim() !== "");
  return line ? line.trim() : "";
}

interface PairTask {
  name: string;
  imagePath: string;
  pairDir: string;
  seed: number;
}

async function buildPair(
  task: PairTask,
  command: string[],
  grid: number,
  noiseStd: number,
): Promise<DatasetPair> {
  mkdirSync(task.pairDir, { recursive: true });
  await runCli(command, [
    "simulate",
    "--phantom",
    "image",
    "--image-file",
    task.imagePath,
    "--seed",
    String(task.seed),
    "--noise-std",
    String(noiseStd),
    "--grid",
    String(grid),
    "--out",
    task.pairDir,
  ]);
  await runCli(command, [
    "reconstruct",
    "--method",
    "das",
    "--scan",
    task.pairDir,
    "--out",
    task.pairDir,
  ]);
  await runCli(command, [
    "reconstruct",
    "--method",
    "mb",
    "--scan",
    task.pairDir,
    "--out",
    task.pairDir,
  ]);
  const sino = readOarrRecord(join(task.pairDir, "sinogram.oarr"), "sinogram");
  const das = readOarrRecord(join(task.pairDir, "recon_das.oarr"), "image");
  const mb = readOarrRecord(join(task.pairDir, "recon_mb.oarr"), "image");
  return {
    name: task.name,
    sinogram: { rows: sino.shape[0], cols: sino.shape[1], data: sino.data },
    input: { h: das.shape[0], w: das.shape[1], data: das.data },
    target: { h: mb.shape[0], w: mb.shape[1], data: mb.data },
  };
}

async function mapPool<T, R>(
  items: T[],
  limit: number,
  fn: (item: T) => Promise<R>,
): Promise<R[]> {
  const results: R[] = new Array(items.length);
  let next = 0;
  const workers = Array.from({ length: Math.max(1, Math.min(limit, items.length)) }, async () => {
    for (;;) {
      const i = next++;
      if (i >= items.length) {
        return;
      }
      results[i] = await fn(items[i]);
    }
  });
  await Promise.all(workers);
  return results;
}

export function datasetFingerprint(pairs: DatasetPair[]): string {
  const hash = createHash("sha256");
  for (const pair of pairs) {
    hash.update(pair.name);
    for (const block of [pair.sinogram.data, pair.input.data, pair.target.data]) {
      hash.update(Buffer.from(block.buffer, block.byteOffset, block.byteLength));
    }
  }
  return hash.digest("hex");
}

/**
 * Build training pairs from every readable image in a directory.
 *
 * Images are processed in sorted name order with per-image seeds derived
 * from the base seed, so a fixed seed reproduces the dataset (and its
 * fingerprint) exactly. Images the CLI cannot read are skipped with a
 * warning; an empty result is an error.
 */
export async function makeDataset(opts: DatasetOptions): Promise<Dataset> {
  const grid = opts.grid ?? 64;
  const noiseStd = opts.noiseStd ?? 0.0;
  const seed = opts.seed ?? 0;
  const command = opts.command ?? defaultCommand();
  const warn = opts.warn ?? ((msg) => console.error(msg));
  if (!statSync(opts.imagesDir, { throwIfNoEntry: false })?.isDirectory()) {
    throw new Error(`image directory not found: ${opts.imagesDir}`);
  }
  const names = readdirSync(opts.imagesDir)
    .filter((name) => statSync(join(opts.imagesDir, name)).isFile())
    .sort();
  if (names.length === 0) {
    throw new Error(`no image files in ${opts.imagesDir}`);
  }
  const workDir = opts.workDir ?? mkdtempSync(join(tmpdir(), "oareco-train-"));
  const tasks: PairTask[] = names.map((name, i) => ({
    name,
    imagePath: join(opts.imagesDir, name),
    pairDir: join(workDir, `${String(i).padStart(3, "0")}_${name.replace(/[^\w.-]/g, "_")}`),
    seed: seed + i,
  }));
  try {
    const maybe = await mapPool(tasks, opts.concurrency ?? 4, async (task) => {
      try {
        return await buildPair(task, command, grid, noiseStd);
      } catch (err) {
        const detail =
          err && typeof err === "object" && "stderr" in err
            ? firstLine(String((err as { stderr: unknown }).stderr))
            : "";
        warn(
          `warning: skipping ${task.name}: ${detail || (err instanceof Error ? err.message : String(err))}`,
        );
        return null;
      }
    });
    const pairs = maybe.filter((p): p is DatasetPair => p !== null);
    if (pairs.length === 0) {
      throw new Error(`no readable images in ${opts.imagesDir}: every pair failed`);
    }
    return { pairs, fingerprint: datasetFingerprint(pairs), grid };
  } finally {
    if (!opts.keepWork && opts.workDir === undefined) {
      rmSync(workDir, { recursive: true, force: true });
    }
  }
}
