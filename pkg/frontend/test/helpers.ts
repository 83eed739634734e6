/** Shared test utilities: tiny architectures, random data, gradient checks. */

import { ArchConfig, makeLayer, validateArch } from "../src/arch.js";
import { Act, act } from "../src/ops.js";
import { Rng } from "../src/tensor.js";

/**
 * Smallest architecture that still exercises every block feature: stem
 * conv, an identity-shortcut MBConv1, a strided MBConv6 with expansion and
 * squeeze-excitation, one decoder level with a skip tap, and the final
 * head. Downsample factor 2.
 */
export function tinyArch(): ArchConfig {
  const arch: ArchConfig = {
    name: "tiny",
    encoder: [
      makeLayer("Conv", 1, 8, 1),
      makeLayer("MBConv1", 8, 8, 1),
      makeLayer("MBConv6", 8, 16, 2, 6),
    ],
    skipTaps: [2],
    decoder: [{ inCh: 16, skipCh: 8, outCh: 8 }],
    finalInCh: 8,
    widthMultiplier: 1.0,
    inputNorm: "none",
  };
  validateArch(arch);
  return arch;
}

export function randomAct(n: number, c: number, h: number, w: number, rng: Rng, scale = 0.5): Act {
  const out = act(n, c, h, w);
  for (let i = 0; i < out.data.length; i++) {
    out.data[i] = (rng.next() * 2 - 1) * scale;
  }
  return out;
}

export function randomVec(len: number, rng: Rng, scale = 0.5): Float64Array {
  const v = new Float64Array(len);
  for (let i = 0; i < len; i++) {
    v[i] = (rng.next() * 2 - 1) * scale;
  }
  return v;
}

/** Central-difference gradient of evalLoss with respect to data, in place-safe. */
export function numericGrad(
  evalLoss: () => number,
  data: Float64Array,
  eps = 1e-4,
): Float64Array {
  const grad = new Float64Array(data.length);
  for (let i = 0; i < data.length; i++) {
    const orig = data[i];
    data[i] = orig + eps;
    const up = evalLoss();
    data[i] = orig - eps;
    const down = evalLoss();
    data[i] = orig;
    grad[i] = (up - down) / (2 * eps);
  }
  return grad;
}

export function maxAbsDiff(a: Float64Array, b: Float64Array): number {
  let worst = 0;
  for (let i = 0; i < a.length; i++) {
    const d = Math.abs(a[i] - b[i]);
    if (d > worst) worst = d;
  }
  return worst;
}

/** Assert elementwise |a - b| <= atol + rtol * |b|; returns the worst excess. */
export function expectClose(
  analytic: Float64Array,
  numeric: Float64Array,
  atol = 1e-6,
  rtol = 1e-4,
): void {
  if (analytic.length !== numeric.length) {
    throw new Error(`length mismatch ${analytic.length} vs ${numeric.length}`);
  }
  for (let i = 0; i < analytic.length; i++) {
    const tol = atol + rtol * Math.abs(numeric[i]);
    const diff = Math.abs(analytic[i] - numeric[i]);
    if (!(diff <= tol)) {
      throw new Error(
        `gradient mismatch at ${i}: analytic ${analytic[i]}, numeric ${numeric[i]} (diff ${diff} > ${tol})`,
      );
    }
  }
}

/** Projection objective sum(r * y) used to drive op-level backward passes. */
export function dot(a: Float64Array, b: Float64Array): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) {
    s += a[i] * b[i];
  }
  return s;
}
