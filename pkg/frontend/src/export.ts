/**
 * Weight export in the inference engine's interchange format.
 *
 * Weights land as OARR1 records in exact manifest order with the
 * architecture sidecar, so the engine can validate the file against its
 * own manifest. The parity fixture pairs one input image with the output
 * computed here in inference mode (running batch-norm statistics); the
 * engine must reproduce it within a small absolute tolerance.
 */

import { ArchConfig, archToMetadata, weightManifest } from "./arch.js";
import { Image2d, Params, forwardInfer } from "./network.js";
import { OarrRecord, writeOarr } from "./oarr.js";

export const FIXTURE_FORMAT = "oareco-fixture-v1";
export const FIXTURE_TOLERANCE_ABS = 1e-4;

export class ExportError extends Error {}

/** Check params against the manifest, naming every offender. */
export function validateAgainstManifest(arch: ArchConfig, params: Params): void {
  const manifest = weightManifest(arch);
  const missing = [...manifest.keys()].filter((name) => !params.has(name));
  const unexpected = [...params.keys()].filter((name) => !manifest.has(name));
  const problems: string[] = [];
  if (missing.length > 0) {
    problems.push(`missing tensors: ${missing.join(", ")}`);
  }
  if (unexpected.length > 0) {
    problems.push(`unexpected tensors: ${unexpected.join(", ")}`);
  }
  for (const [name, shape] of manifest) {
    const param = params.get(name);
    if (param && param.shape.join(",") !== shape.join(",")) {
      problems.push(
        `shape mismatch for ${name}: expected (${shape.join(", ")}), got (${param.shape.join(", ")})`,
      );
    }
  }
  if (problems.length > 0) {
    throw new ExportError(problems.join("; "));
  }
}

/** Write every tensor in manifest order plus the architecture sidecar. */
export function exportWeights(arch: ArchConfig, params: Params, outPath: string): void {
  validateAgainstManifest(arch, params);
  const manifest = weightManifest(arch);
  const records: OarrRecord[] = [];
  for (const [name, shape] of manifest) {
    records.push({ name, dtype: "float64", shape: [...shape], data: params.get(name)!.data });
  }
  const metadata: Record<string, string> = {
    ...archToMetadata(arch),
    manifest: [...manifest.keys()].join(","),
  };
  writeOarr(outPath, records, metadata);
}

/**
 * Write the parity fixture: the input image and the inference-mode output
 * for it, as the records "input" and "expected". Returns the expected
 * output so callers can cross-check the engine against it.
 */
export function writeParityFixture(
  arch: ArchConfig,
  params: Params,
  input: Image2d,
  outPath: string,
): Float64Array {
  validateAgainstManifest(arch, params);
  const expected = forwardInfer(arch, params, input);
  writeOarr(
    outPath,
    [
      { name: "input", dtype: "float64", shape: [input.h, input.w], data: input.data },
      { name: "expected", dtype: "float64", shape: [input.h, input.w], data: expected },
    ],
    {
      format: FIXTURE_FORMAT,
      arch: arch.name,
      width_multiplier: String(arch.widthMultiplier),
      input_norm: arch.inputNorm,
      tolerance_abs: String(FIXTURE_TOLERANCE_ABS),
    },
  );
  return expected;
}
