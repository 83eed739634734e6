/**
 * Dense float64 tensors in channel-first layout plus a seeded RNG.
 *
 * Activations are stored as [n, c, h, w], convolution weights as
 * [outCh, inChPerGroup, k, k], vectors as [c]; data is always a flat
 * row-major Float64Array so kernels can index it directly.
 */

export interface Tensor {
  readonly shape: readonly number[];
  readonly data: Float64Array;
}

export function numel(shape: readonly number[]): number {
  let n = 1;
  for (const d of shape) {
    if (!Number.isInteger(d) || d < 1) {
      throw new Error(`invalid dimension ${d} in shape [${shape.join(", ")}]`);
    }
    n *= d;
  }
  return n;
}

export function zeros(shape: readonly number[]): Tensor {
  return { shape: [...shape], data: new Float64Array(numel(shape)) };
}

export function tensorFrom(shape: readonly number[], data: Float64Array): Tensor {
  if (data.length !== numel(shape)) {
    throw new Error(
      `data length ${data.length} does not match shape [${shape.join(", ")}]`,
    );
  }
  return { shape: [...shape], data };
}

export function shapesEqual(a: readonly number[], b: readonly number[]): boolean {
  return a.length === b.length && a.every((d, i) => d === b[i]);
}

export function assertShape(t: Tensor, shape: readonly number[], name: string): void {
  if (!shapesEqual(t.shape, shape)) {
    throw new Error(
      `${name} must have shape [${shape.join(", ")}], got [${t.shape.join(", ")}]`,
    );
  }
}

/** Deterministic 32-bit PRNG (mulberry32); good enough for init and shuffles. */
export class Rng {
  private state: number;
  private spare: number | null = null;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** Uniform in [0, 1). */
  next(): number {
    this.state = (this.state + 0x6d2b79f5) >>> 0;
    let t = this.state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  /** Uniform integer in [0, n). */
  int(n: number): number {
    return Math.floor(this.next() * n);
  }

  /** Standard normal via Box-Muller. */
  gauss(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    let u = 0;
    while (u === 0) u = this.next();
    const r = Math.sqrt(-2 * Math.log(u));
    const theta = 2 * Math.PI * this.next();
    this.spare = r * Math.sin(theta);
    return r * Math.cos(theta);
  }

  /** In-place Fisher-Yates shuffle. */
  shuffle(indices: number[]): void {
    for (let i = indices.length - 1; i > 0; i--) {
      const j = this.int(i + 1);
      const tmp = indices[i];
      indices[i] = indices[j];
      indices[j] = tmp;
    }
  }
}
