#!/usr/bin/env node
/**
 * Command-line front end for the trainer.
 *
 * `train --images DIR --arch default --epochs N --out weights.oarr`
 * synthesizes the dataset through the reconstruction CLI, runs the
 * training loop, and exports manifest-ordered weights plus a parity
 * fixture. `gen-images` produces synthetic grayscale source images for
 * quick experiments.
 *
 * Exit status: 0 success, 1 validation/usage error, 2 numerical failure.
 */

import { mkdirSync, realpathSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { InputNorm, parameterCount, templateArch } from "./arch.js";
import { defaultCommand, makeDataset } from "./dataset.js";
import { exportWeights, writeParityFixture } from "./export.js";
import { formatKeyValues } from "./oarr.js";
import { blobImage, encodeGrayPng } from "./png.js";
import { Rng } from "./tensor.js";
import { TrainingError, deskConfig, train } from "./train.js";

export const EXIT_OK = 0;
export const EXIT_USAGE = 1;
export const EXIT_NUMERICAL = 2;

class UsageError extends Error {}

const USAGE = `usage: oareco-train COMMAND [options]

commands:
  train        synthesize a dataset from images and train the network
    --images DIR          directory of grayscale-convertible images (required)
    --out FILE            output weight file, e.g. weights.oarr (required)
    --arch NAME           architecture template (default: default)
    --width-multiplier X  channel scaling (default: 1.0)
    --input-norm MODE     none or max_abs (default: none)
    --epochs N            training epochs (default: 50)
    --batch-size N        SGD batch size (default: 8)
    --lr X                learning rate (default: 0.01)
    --momentum X          SGD momentum (default: 0.99)
    --lr-decay X          per-epoch decay factor (default: 0.99)
    --grad-clip X         global gradient-norm cap (default: 1.0)
    --beta X              smooth-L1 knee (default: 0.1)
    --seed N              RNG seed for data and init (default: 0)
    --noise-std X         sinogram noise level (default: 0)
    --grid N              image grid side (default: 64)
    --fixture-out FILE    parity fixture path (default: fixture.oarr next to --out)
    --oareco CMD          reconstruction CLI to drive (default: $OARECO_CMD or oareco)
    --work-dir DIR        keep dataset scratch files here
    --concurrency N       parallel dataset jobs (default: 4)
    --quiet               suppress per-epoch progress
  gen-images   write synthetic grayscale training images
    --out DIR             output directory (required)
    --count N             number of images (default: 16)
    --size N              image side in pixels (default: 64)
    --seed N              RNG seed (default: 0)
`;

function parseNumber(name: string, raw: string, integer = false): number {
  const value = Number(raw);
  if (!Number.isFinite(value) || (integer && !Number.isInteger(value))) {
    throw new UsageError(`--${name} expects ${integer ? "an integer" : "a number"}, got ${raw}`);
  }
  return value;
}

function parse(
  args: string[],
  options: Record<string, { type: "string" | "boolean"; default?: string | boolean }>,
): Record<string, string | boolean | undefined> {
  try {
    return parseArgs({ args, options, strict: true, allowPositionals: false }).values;
  } catch (err) {
    throw new UsageError(err instanceof Error ? err.message : String(err));
  }
}

async function cmdTrain(args: string[]): Promise<number> {
  const values = parse(args, {
    images: { type: "string" },
    out: { type: "string" },
    arch: { type: "string", default: "default" },
    "width-multiplier": { type: "string", default: "1.0" },
    "input-norm": { type: "string", default: "none" },
    epochs: { type: "string", default: "50" },
    "batch-size": { type: "string", default: "8" },
    lr: { type: "string", default: "0.01" },
    momentum: { type: "string", default: "0.99" },
    "lr-decay": { type: "string", default: "0.99" },
    "grad-clip": { type: "string", default: "1.0" },
    beta: { type: "string", default: "0.1" },
    seed: { type: "string", default: "0" },
    "noise-std": { type: "string", default: "0" },
    grid: { type: "string", default: "64" },
    "fixture-out": { type: "string" },
    oareco: { type: "string" },
    "work-dir": { type: "string" },
    concurrency: { type: "string", default: "4" },
    quiet: { type: "boolean", default: false },
  });
  const imagesDir = values.images as string | undefined;
  const outPath = values.out as string | undefined;
  if (!imagesDir || !outPath) {
    throw new UsageError("train requires --images and --out");
  }
  const cfg = deskConfig({
    epochs: parseNumber("epochs", values.epochs as string, true),
    batchSize: parseNumber("batch-size", values["batch-size"] as string, true),
    lr: parseNumber("lr", values.lr as string),
    momentum: parseNumber("momentum", values.momentum as string),
    lrDecayPerEpoch: parseNumber("lr-decay", values["lr-decay"] as string),
    gradClipNorm: parseNumber("grad-clip", values["grad-clip"] as string),
    smoothL1Beta: parseNumber("beta", values.beta as string),
    seed: parseNumber("seed", values.seed as string, true),
  });
  const arch = templateArch(
    values.arch as string,
    parseNumber("width-multiplier", values["width-multiplier"] as string),
    values["input-norm"] as InputNorm,
  );
  const grid = parseNumber("grid", values.grid as string, true);
  const dataset = await makeDataset({
    imagesDir,
    grid,
    noiseStd: parseNumber("noise-std", values["noise-std"] as string),
    seed: cfg.seed,
    command: values.oareco ? (values.oareco as string).trim().split(/\s+/) : defaultCommand(),
    workDir: values["work-dir"] as string | undefined,
    concurrency: parseNumber("concurrency", values.concurrency as string, true),
  });
  console.log(`dataset: ${dataset.pairs.length} pairs at ${grid}x${grid}`);
  const quiet = values.quiet as boolean;
  const result = train(cfg, dataset.pairs, arch, (epoch, loss, lr) => {
    if (!quiet) {
      console.log(`epoch ${epoch}/${cfg.epochs}  loss ${loss.toExponential(6)}  lr ${lr.toExponential(4)}`);
    }
  });
  mkdirSync(dirname(outPath) || ".", { recursive: true });
  exportWeights(arch, result.params, outPath);
  const fixturePath = (values["fixture-out"] as string | undefined) ?? join(dirname(outPath) || ".", "fixture.oarr");
  writeParityFixture(arch, result.params, dataset.pairs[0].input, fixturePath);
  const first = result.epochLosses[0];
  const last = result.epochLosses[result.epochLosses.length - 1];
  process.stdout.write(
    formatKeyValues({
      pairs: dataset.pairs.length,
      grid,
      epochs: cfg.epochs,
      params: parameterCount(arch),
      epoch1_loss: first,
      final_loss: last,
      loss_ratio: last / first,
      dataset_fingerprint: dataset.fingerprint,
      weights_file: outPath,
      fixture_file: fixturePath,
    }),
  );
  return EXIT_OK;
}

function cmdGenImages(args: string[]): number {
  const values = parse(args, {
    out: { type: "string" },
    count: { type: "string", default: "16" },
    size: { type: "string", default: "64" },
    seed: { type: "string", default: "0" },
  });
  const outDir = values.out as string | undefined;
  if (!outDir) {
    throw new UsageError("gen-images requires --out");
  }
  const count = parseNumber("count", values.count as string, true);
  const size = parseNumber("size", values.size as string, true);
  const seed = parseNumber("seed", values.seed as string, true);
  if (count < 1 || size < 1) {
    throw new UsageError("--count and --size must be positive");
  }
  mkdirSync(outDir, { recursive: true });
  const rng = new Rng(seed);
  for (let i = 0; i < count; i++) {
    const name = `blob_${String(i).padStart(2, "0")}.png`;
    writeFileSync(join(outDir, name), encodeGrayPng(size, size, blobImage(size, rng)));
  }
  console.log(`wrote ${count} images to ${outDir}`);
  return EXIT_OK;
}

export async function main(argv: string[]): Promise<number> {
  try {
    const [command, ...rest] = argv;
    if (!command || command === "--help" || command === "-h") {
      process.stderr.write(USAGE);
      return command ? EXIT_OK : EXIT_USAGE;
    }
    if (command === "train") {
      return await cmdTrain(rest);
    }
    if (command === "gen-images") {
      return cmdGenImages(rest);
    }
    throw new UsageError(`unknown subcommand ${JSON.stringify(command)}; expected train or gen-images`);
  } catch (err) {
    if (err instanceof TrainingError) {
      process.stderr.write(`numerical failure: ${err.message}\n`);
      return EXIT_NUMERICAL;
    }
    if (err instanceof Error) {
      process.stderr.write(`error: ${err.message}\n`);
      return EXIT_USAGE;
    }
    throw err;
  }
}

function isDirectRun(): boolean {
  if (!process.argv[1]) {
    return false;
  }
  try {
    return import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;
  } catch {
    return false;
  }
}

if (isDirectRun()) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
