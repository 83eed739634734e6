/**
 * SGD with classical momentum plus global gradient-norm clipping.
 *
 * The velocity update is v = momentum * v + g and the weight update is
 * w -= lr * v, so a zero learning rate leaves weights untouched no matter
 * how long training runs. Clipping rescales the whole gradient set when
 * its global L2 norm exceeds the configured maximum.
 */

import { isTrainable } from "./arch.js";
import { Grads, Params } from "./network.js";

/** Scale all gradients so their global L2 norm is at most maxNorm; returns the pre-clip norm. */
export function clipGradNorm(grads: Grads, maxNorm: number): number {
  if (maxNorm <= 0) {
    throw new Error(`maxNorm must be > 0, got ${maxNorm}`);
  }
  let sq = 0;
  for (const g of grads.values()) {
    for (let i = 0; i < g.length; i++) {
      sq += g[i] * g[i];
    }
  }
  const norm = Math.sqrt(sq);
  if (norm > maxNorm) {
    const scale = maxNorm / norm;
    for (const g of grads.values()) {
      for (let i = 0; i < g.length; i++) {
        g[i] *= scale;
      }
    }
  }
  return norm;
}

export class Sgd {
  readonly momentum: number;
  private velocities: Map<string, Float64Array> = new Map();

  constructor(momentum: number) {
    if (momentum < 0 || momentum >= 1) {
      throw new Error(`momentum must be in [0, 1), got ${momentum}`);
    }
    this.momentum = momentum;
  }

  step(params: Params, grads: Grads, lr: number): void {
    for (const [name, grad] of grads) {
      if (!isTrainable(name)) {
        continue;
      }
      const param = params.get(name);
      if (!param) {
        throw new Error(`gradient for unknown parameter ${JSON.stringify(name)}`);
      }
      let v = this.velocities.get(name);
      if (!v) {
        v = new Float64Array(grad.length);
        this.velocities.set(name, v);
      }
      const mu = this.momentum;
      const w = param.data;
      for (let i = 0; i < grad.length; i++) {
        v[i] = mu * v[i] + grad[i];
        w[i] -= lr * v[i];
      }
    }
  }
}
