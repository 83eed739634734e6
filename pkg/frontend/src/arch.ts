/**
 * Declarative network architecture: block list, channels, strides, taps.
 *
 * This mirrors the inference engine's architecture schema exactly — same
 * block kinds, channel scaling, sidecar metadata keys, and weight-manifest
 * naming — so weights trained here drop straight into that engine.
 */

import { formatFloat } from "./oarr.js";

export const ENCODER_KINDS = ["Conv", "MBConv1", "MBConv6", "DoubleConv"] as const;
export type EncoderKind = (typeof ENCODER_KINDS)[number];

export const KERNEL = 3;
export const INPUT_NORMS = ["none", "max_abs"] as const;
export type InputNorm = (typeof INPUT_NORMS)[number];

export const ARCH_FORMAT = "oareco-arch-v1";

/** Scale a channel count, rounding to the nearest multiple of 8 (min 8). */
export function scaleChannels(base: number, widthMultiplier: number): number {
  if (widthMultiplier <= 0) {
    throw new Error(`widthMultiplier must be > 0, got ${widthMultiplier}`);
  }
  return Math.max(8, Math.trunc((base * widthMultiplier) / 8.0 + 0.5) * 8);
}

/** One encoder block; channels are concrete (already scaled). */
export interface LayerConfig {
  kind: EncoderKind;
  inCh: number;
  outCh: number;
  stride: number;
  expansion: number;
  seReduction: number;
}

export function makeLayer(
  kind: EncoderKind,
  inCh: number,
  outCh: number,
  stride = 1,
  expansion = 1,
): LayerConfig {
  if (!ENCODER_KINDS.includes(kind)) {
    throw new Error(`unknown layer kind ${JSON.stringify(kind)}`);
  }
  if (inCh < 1 || outCh < 1) {
    throw new Error(`${kind}: channel counts must be positive`);
  }
  if (stride !== 1 && stride !== 2) {
    throw new Error(`${kind}: stride must be 1 or 2, got ${stride}`);
  }
  if (kind === "MBConv6" && expansion !== 6) {
    throw new Error("MBConv6 requires expansion 6");
  }
  if (kind === "MBConv1" && expansion !== 1) {
    throw new Error("MBConv1 requires expansion 1");
  }
  return { kind, inCh, outCh, stride, expansion, seReduction: 4 };
}

export function expandedCh(layer: LayerConfig): number {
  return layer.inCh * layer.expansion;
}

export function seCh(layer: LayerConfig): number {
  return Math.max(Math.trunc(expandedCh(layer) / layer.seReduction), 1);
}

export function residualActive(layer: LayerConfig): boolean {
  return (
    (layer.kind === "MBConv1" || layer.kind === "MBConv6") &&
    layer.stride === 1 &&
    layer.inCh === layer.outCh
  );
}

/** One expanding-path level: upsample 2x, concat a skip tap, DoubleConv. */
export interface DecoderLevel {
  inCh: number;
  skipCh: number;
  outCh: number;
}

export interface ArchConfig {
  name: string;
  encoder: LayerConfig[];
  skipTaps: number[];
  decoder: DecoderLevel[];
  finalInCh: number;
  widthMultiplier: number;
  inputNorm: InputNorm;
}

export function validateArch(arch: ArchConfig): void {
  if (arch.encoder.length === 0) {
    throw new Error("encoder must contain at least one block");
  }
  if (!INPUT_NORMS.includes(arch.inputNorm)) {
    throw new Error(`inputNorm must be one of ${INPUT_NORMS.join(", ")}`);
  }
  let prev = 1;
  arch.encoder.forEach((layer, idx) => {
    if (layer.inCh !== prev) {
      throw new Error(
        `encoder block ${idx + 1}: inCh ${layer.inCh} does not chain from ${prev}`,
      );
    }
    prev = layer.outCh;
  });
  const nEnc = arch.encoder.length;
  if (arch.skipTaps.length !== arch.decoder.length) {
    throw new Error("one skip tap is required per decoder level");
  }
  for (let i = 0; i < arch.skipTaps.length; i++) {
    const t = arch.skipTaps[i];
    if (t < 1 || t > nEnc) {
      throw new Error(`skip tap ${t} outside encoder range 1..${nEnc}`);
    }
    if (i > 0 && arch.skipTaps[i] <= arch.skipTaps[i - 1]) {
      throw new Error("skipTaps must be strictly ascending");
    }
  }
  const nDown = arch.encoder.filter((l) => l.stride === 2).length;
  if (nDown !== arch.decoder.length) {
    throw new Error(
      `${nDown} stride-2 encoder stages need ${nDown} decoder levels, ` +
        `got ${arch.decoder.length}`,
    );
  }
  prev = arch.encoder[nEnc - 1].outCh;
  const reversedTaps = [...arch.skipTaps].reverse();
  arch.decoder.forEach((lvl, i) => {
    if (lvl.inCh !== prev) {
      throw new Error(`decoder level inCh ${lvl.inCh} does not chain from ${prev}`);
    }
    const tapCh = arch.encoder[reversedTaps[i] - 1].outCh;
    if (lvl.skipCh !== tapCh) {
      throw new Error(
        `decoder skipCh ${lvl.skipCh} does not match tap ${reversedTaps[i]} channels ${tapCh}`,
      );
    }
    prev = lvl.outCh;
  });
  if (arch.finalInCh !== prev) {
    throw new Error(`final inCh ${arch.finalInCh} does not chain from ${prev}`);
  }
}

export function downsampleFactor(arch: ArchConfig): number {
  return 2 ** arch.encoder.filter((l) => l.stride === 2).length;
}

const EDMB_ENCODER: Array<[EncoderKind, number, number, number]> = [
  ["Conv", 1, 32, 1],
  ["MBConv1", 32, 16, 1],
  ["MBConv6", 16, 24, 2],
  ["MBConv6", 24, 40, 2],
  ["MBConv6", 40, 80, 2],
  ["MBConv6", 80, 112, 1],
  ["MBConv6", 112, 192, 2],
];
const EDMB_TAPS = [2, 3, 4, 6];

const UNET_ENCODER: Array<[EncoderKind, number, number, number]> = [
  ["DoubleConv", 1, 64, 1],
  ["DoubleConv", 64, 128, 2],
  ["DoubleConv", 128, 256, 2],
  ["DoubleConv", 256, 512, 2],
];
const UNET_TAPS = [1, 2, 3];

function buildFromTemplate(
  name: string,
  blocks: Array<[EncoderKind, number, number, number]>,
  taps: number[],
  widthMultiplier: number,
  inputNorm: InputNorm,
): ArchConfig {
  const ch = (base: number) => scaleChannels(base, widthMultiplier);
  const encoder = blocks.map(([kind, cin, cout, stride]) =>
    makeLayer(kind, cin === 1 ? 1 : ch(cin), ch(cout), stride, kind === "MBConv6" ? 6 : 1),
  );
  const decoder: DecoderLevel[] = [];
  let prev = encoder[encoder.length - 1].outCh;
  for (const tap of [...taps].reverse()) {
    const skip = encoder[tap - 1].outCh;
    decoder.push({ inCh: prev, skipCh: skip, outCh: skip });
    prev = skip;
  }
  const arch: ArchConfig = {
    name,
    encoder,
    skipTaps: [...taps],
    decoder,
    finalInCh: prev,
    widthMultiplier,
    inputNorm,
  };
  validateArch(arch);
  return arch;
}

export function efficientdeepmbArch(widthMultiplier = 1.0, inputNorm: InputNorm = "none"): ArchConfig {
  return buildFromTemplate("efficientdeepmb", EDMB_ENCODER, EDMB_TAPS, widthMultiplier, inputNorm);
}

export function unetArch(widthMultiplier = 1.0, inputNorm: InputNorm = "none"): ArchConfig {
  return buildFromTemplate("unet", UNET_ENCODER, UNET_TAPS, widthMultiplier, inputNorm);
}

export const TEMPLATES: Record<string, (wm?: number, norm?: InputNorm) => ArchConfig> = {
  efficientdeepmb: efficientdeepmbArch,
  default: efficientdeepmbArch,
  unet: unetArch,
};

export function templateArch(
  name: string,
  widthMultiplier = 1.0,
  inputNorm: InputNorm = "none",
): ArchConfig {
  const builder = TEMPLATES[name];
  if (!builder) {
    const known = Object.keys(TEMPLATES).sort().join(", ");
    throw new Error(`unknown architecture template ${JSON.stringify(name)}; choose from ${known}`);
  }
  return builder(widthMultiplier, inputNorm);
}

/** Flatten an ArchConfig into sidecar key/value pairs. */
export function archToMetadata(arch: ArchConfig): Record<string, string> {
  return {
    format: ARCH_FORMAT,
    name: arch.name,
    width_multiplier: formatFloat(arch.widthMultiplier),
    input_norm: arch.inputNorm,
    encoder: arch.encoder.map((l) => `${l.kind}:${l.inCh}:${l.outCh}:${l.stride}`).join(","),
    skip_taps: arch.skipTaps.join(","),
    decoder: arch.decoder.map((d) => `${d.inCh}:${d.skipCh}:${d.outCh}`).join(","),
    final: `${arch.finalInCh}:1`,
  };
}

/** Rebuild an ArchConfig from sidecar key/value pairs. */
export function archFromMetadata(meta: Record<string, string>): ArchConfig {
  const format = meta.format ?? ARCH_FORMAT;
  if (format !== ARCH_FORMAT) {
    throw new Error(`unsupported architecture format ${JSON.stringify(format)}`);
  }
  const encoder = meta.encoder.split(",").map((item) => {
    const [kind, cin, cout, stride] = item.trim().split(":");
    return makeLayer(
      kind as EncoderKind,
      Number(cin),
      Number(cout),
      Number(stride),
      kind === "MBConv6" ? 6 : 1,
    );
  });
  const skipTaps = meta.skip_taps.split(",").map((t) => Number(t));
  const decoder = meta.decoder.split(",").map((item) => {
    const [cin, skip, cout] = item.trim().split(":").map(Number);
    return { inCh: cin, skipCh: skip, outCh: cout };
  });
  const [finalIn, finalOut] = meta.final.split(":").map(Number);
  if (finalOut !== 1) {
    throw new Error("final block must map to 1 channel");
  }
  const arch: ArchConfig = {
    name: meta.name ?? "custom",
    encoder,
    skipTaps,
    decoder,
    finalInCh: finalIn,
    widthMultiplier: Number(meta.width_multiplier ?? 1.0),
    inputNorm: (meta.input_norm ?? "none") as InputNorm,
  };
  validateArch(arch);
  return arch;
}

function convEntries(
  prefix: string,
  inCh: number,
  outCh: number,
  kernel = KERNEL,
  bn = true,
): Array<[string, number[]]> {
  const entries: Array<[string, number[]]> = [
    [`${prefix}.weight`, [outCh, inCh, kernel, kernel]],
    [`${prefix}.bias`, [outCh]],
  ];
  if (bn) {
    for (const stat of ["gamma", "beta", "mean", "var"]) {
      entries.push([`${prefix}_bn.${stat}`, [outCh]]);
    }
  }
  return entries;
}

/**
 * Ordered mapping of tensor name -> shape for every weight in the net.
 *
 * The ordering defines the record order in weight files. Batch-norm
 * running statistics (.mean, .var) appear here but are not trainable.
 */
export function weightManifest(arch: ArchConfig): Map<string, number[]> {
  const names = new Map<string, number[]>();
  const add = (entries: Array<[string, number[]]>) => {
    for (const [name, shape] of entries) {
      names.set(name, shape);
    }
  };
  arch.encoder.forEach((layer, idx) => {
    const p = `enc${idx + 1}`;
    if (layer.kind === "Conv") {
      add(convEntries(`${p}.conv`, layer.inCh, layer.outCh));
    } else if (layer.kind === "DoubleConv") {
      add(convEntries(`${p}.conv1`, layer.inCh, layer.outCh));
      add(convEntries(`${p}.conv2`, layer.outCh, layer.outCh));
    } else {
      const exp = expandedCh(layer);
      if (layer.kind === "MBConv6") {
        add(convEntries(`${p}.expand`, layer.inCh, exp, 1));
      }
      add([
        [`${p}.depthwise.weight`, [exp, 1, KERNEL, KERNEL]],
        [`${p}.depthwise.bias`, [exp]],
      ]);
      for (const stat of ["gamma", "beta", "mean", "var"]) {
        names.set(`${p}.depthwise_bn.${stat}`, [exp]);
      }
      const se = seCh(layer);
      add([
        [`${p}.se.reduce.weight`, [se, exp, 1, 1]],
        [`${p}.se.reduce.bias`, [se]],
        [`${p}.se.expand.weight`, [exp, se, 1, 1]],
        [`${p}.se.expand.bias`, [exp]],
      ]);
      add(convEntries(`${p}.project`, exp, layer.outCh, 1));
    }
  });
  arch.decoder.forEach((lvl, idx) => {
    const p = `dec${idx + 1}`;
    const merged = lvl.inCh + lvl.skipCh;
    add(convEntries(`${p}.conv1`, merged, lvl.outCh));
    add(convEntries(`${p}.conv2`, lvl.outCh, lvl.outCh));
  });
  add([
    ["final.weight", [1, arch.finalInCh, KERNEL, KERNEL]],
    ["final.bias", [1]],
  ]);
  return names;
}

/** Running statistics ride along in weight files but are not parameters. */
export function isTrainable(tensorName: string): boolean {
  return !tensorName.endsWith(".mean") && !tensorName.endsWith(".var");
}

/** Trainable parameters; batch-norm running stats are excluded. */
export function parameterCount(arch: ArchConfig): number {
  let total = 0;
  for (const [name, shape] of weightManifest(arch)) {
    if (isTrainable(name)) {
      total += shape.reduce((acc, d) => acc * d, 1);
    }
  }
  return total;
}
