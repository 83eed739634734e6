import { describe, expect, it } from "vitest";

import { weightManifest } from "../src/arch.js";
import { initParams } from "../src/network.js";
import { Sgd, clipGradNorm } from "../src/optimizer.js";
import { Rng } from "../src/tensor.js";
import {
  FULL_SCALE_EPOCHS,
  TrainingError,
  TrainingPair,
  deskConfig,
  train,
  validateTrainConfig,
} from "../src/train.js";
import { tinyArch } from "./helpers.js";

function smoothPairs(count: number, side: number, seed: number): TrainingPair[] {
  const rng = new Rng(seed);
  const pairs: TrainingPair[] = [];
  for (let p = 0; p < count; p++) {
    const fx = 0.5 + rng.next();
    const fy = 0.5 + rng.next();
    const input = new Float64Array(side * side);
    for (let i = 0; i < side; i++) {
      for (let j = 0; j < side; j++) {
        input[i * side + j] = Math.abs(Math.sin(fx * i + fy * j));
      }
    }
    pairs.push({
      name: `pair${p}`,
      input: { h: side, w: side, data: input },
      target: { h: side, w: side, data: Float64Array.from(input, (v) => 0.6 * v) },
    });
  }
  return pairs;
}

describe("deskConfig", () => {
  it("carries the stock recipe", () => {
    expect(deskConfig()).toEqual({
      epochs: 50,
      batchSize: 8,
      lr: 0.01,
      momentum: 0.99,
      lrDecayPerEpoch: 0.99,
      gradClipNorm: 1.0,
      smoothL1Beta: 0.1,
      seed: 0,
    });
    expect(FULL_SCALE_EPOCHS).toBe(350);
    expect(deskConfig({ epochs: 3 }).epochs).toBe(3);
  });
});

describe("validateTrainConfig", () => {
  it("accepts lr = 0 but rejects negative rates", () => {
    expect(() => validateTrainConfig(deskConfig({ lr: 0 }))).not.toThrow();
    expect(() => validateTrainConfig(deskConfig({ lr: -1e-3 }))).toThrow(/lr/);
    expect(() => validateTrainConfig(deskConfig({ lr: Infinity }))).toThrow(/lr/);
  });

  it("rejects out-of-range fields", () => {
    expect(() => validateTrainConfig(deskConfig({ epochs: 0 }))).toThrow(/epochs/);
    expect(() => validateTrainConfig(deskConfig({ epochs: 1.5 }))).toThrow(/epochs/);
    expect(() => validateTrainConfig(deskConfig({ batchSize: 0 }))).toThrow(/batchSize/);
    expect(() => validateTrainConfig(deskConfig({ momentum: 1 }))).toThrow(/momentum/);
    expect(() => validateTrainConfig(deskConfig({ momentum: -0.1 }))).toThrow(/momentum/);
    expect(() => validateTrainConfig(deskConfig({ lrDecayPerEpoch: 0 }))).toThrow(/lrDecay/);
    expect(() => validateTrainConfig(deskConfig({ gradClipNorm: 0 }))).toThrow(/gradClip/);
    expect(() => validateTrainConfig(deskConfig({ smoothL1Beta: 0 }))).toThrow(/smoothL1Beta/);
    expect(() => validateTrainConfig(deskConfig({ seed: 0.5 }))).toThrow(/seed/);
  });
});

describe("clipGradNorm", () => {
  it("rescales to the maximum norm and reports the pre-clip value", () => {
    const grads = new Map([
      ["a", Float64Array.from([3, 0])],
      ["b", Float64Array.from([0, 4])],
    ]);
    const norm = clipGradNorm(grads, 1.0);
    expect(norm).toBeCloseTo(5, 12);
    const after = Math.hypot(...grads.get("a")!, ...grads.get("b")!);
    expect(after).toBeCloseTo(1.0, 12);
    expect(grads.get("a")![0]).toBeCloseTo(0.6, 12);
  });

  it("leaves small gradients untouched", () => {
    const grads = new Map([["a", Float64Array.from([0.3, 0.4])]]);
    expect(clipGradNorm(grads, 1.0)).toBeCloseTo(0.5, 12);
    expect(grads.get("a")![0]).toBe(0.3);
  });

  it("rejects non-positive maxima", () => {
    expect(() => clipGradNorm(new Map<string, Float64Array>(), 0)).toThrow(/maxNorm/);
  });
});

describe("Sgd", () => {
  it("applies classical momentum: v = mu v + g, w -= lr v", () => {
    const params = new Map([["x.weight", { shape: [1], data: Float64Array.from([0]) }]]);
    const sgd = new Sgd(0.5);
    const g = new Map([["x.weight", Float64Array.from([1])]]);
    sgd.step(params, g, 0.1);
    expect(params.get("x.weight")!.data[0]).toBeCloseTo(-0.1, 12);
    sgd.step(params, g, 0.1);
    expect(params.get("x.weight")!.data[0]).toBeCloseTo(-0.25, 12);
    sgd.step(params, g, 0.1);
    expect(params.get("x.weight")!.data[0]).toBeCloseTo(-0.425, 12);
  });

  it("skips running statistics and rejects unknown names", () => {
    const params = new Map([["bn.mean", { shape: [1], data: Float64Array.from([7]) }]]);
    const sgd = new Sgd(0);
    sgd.step(params, new Map([["bn.mean", Float64Array.from([1])]]), 0.1);
    expect(params.get("bn.mean")!.data[0]).toBe(7);
    expect(() => sgd.step(params, new Map([["ghost.weight", Float64Array.from([1])]]), 0.1)).toThrow(
      /unknown parameter/,
    );
    expect(() => new Sgd(1)).toThrow(/momentum/);
  });
});

describe("train", () => {
  it("returns one loss per epoch and a full parameter set", () => {
    const arch = tinyArch();
    const cfg = deskConfig({ epochs: 3, batchSize: 2, momentum: 0.5, seed: 1 });
    const { params, epochLosses } = train(cfg, smoothPairs(4, 8, 2), arch);
    expect(epochLosses.length).toBe(3);
    expect([...params.keys()]).toEqual([...weightManifest(arch).keys()]);
    expect(epochLosses.every((l) => Number.isFinite(l))).toBe(true);
  });

  it("descends on a learnable problem", () => {
    const cfg = deskConfig({ epochs: 30, batchSize: 2, momentum: 0.5, seed: 3 });
    const { epochLosses } = train(cfg, smoothPairs(4, 8, 4), tinyArch());
    expect(epochLosses[epochLosses.length - 1]).toBeLessThan(epochLosses[0]);
  });

  it("reports epoch losses and decayed rates through the hook", () => {
    const cfg = deskConfig({ epochs: 3, batchSize: 4, momentum: 0.5, lr: 0.01, lrDecayPerEpoch: 0.5 });
    const seen: Array<[number, number]> = [];
    train(cfg, smoothPairs(4, 8, 5), tinyArch(), (epoch, _loss, lr) => seen.push([epoch, lr]));
    expect(seen.map(([e]) => e)).toEqual([1, 2, 3]);
    // decay applies at each epoch's end, so epoch 1 runs at the base rate
    expect(seen.map(([, lr]) => lr)).toEqual([0.01, 0.005, 0.0025]);
  });

  it("is bit-for-bit reproducible under the seed", () => {
    const cfg = deskConfig({ epochs: 4, batchSize: 3, momentum: 0.9, seed: 11 });
    const a = train(cfg, smoothPairs(5, 8, 6), tinyArch());
    const b = train(cfg, smoothPairs(5, 8, 6), tinyArch());
    expect(a.epochLosses).toEqual(b.epochLosses);
    for (const [name, p] of a.params) {
      expect(Array.from(b.params.get(name)!.data)).toEqual(Array.from(p.data));
    }
    const c = train(deskConfig({ epochs: 4, batchSize: 3, momentum: 0.9, seed: 12 }), smoothPairs(5, 8, 6), tinyArch());
    expect(c.epochLosses).not.toEqual(a.epochLosses);
  });

  it("with lr = 0 leaves every trainable weight bit-identical", () => {
    const arch = tinyArch();
    const cfg = deskConfig({ epochs: 2, batchSize: 2, lr: 0, seed: 5 });
    const reference = initParams(arch, cfg.seed);
    const { params, epochLosses } = train(cfg, smoothPairs(3, 4, 7), arch);
    let statsMoved = false;
    for (const [name, p] of params) {
      if (name.endsWith(".mean") || name.endsWith(".var")) {
        // batch-norm running stats track the data even with a zero rate
        if (!Array.from(p.data).every((v, i) => v === reference.get(name)!.data[i])) {
          statsMoved = true;
        }
      } else {
        expect(Array.from(p.data)).toEqual(Array.from(reference.get(name)!.data));
      }
    }
    expect(statsMoved).toBe(true);
    expect(epochLosses.length).toBe(2);
  });

  it("aborts with the offending epoch when the loss leaves the reals", () => {
    const pairs = smoothPairs(2, 4, 8);
    pairs[0].input.data[0] = Infinity;
    const cfg = deskConfig({ epochs: 5, batchSize: 2 });
    let caught: TrainingError | undefined;
    try {
      train(cfg, pairs, tinyArch());
    } catch (err) {
      caught = err as TrainingError;
    }
    expect(caught).toBeInstanceOf(TrainingError);
    expect(caught!.epoch).toBe(1);
    expect(caught!.message).toMatch(/non-finite loss at epoch 1/);
  });

  it("rejects empty datasets, ragged pairs and indivisible sizes", () => {
    const cfg = deskConfig({ epochs: 1 });
    expect(() => train(cfg, [], tinyArch())).toThrow(/empty dataset/);
    const ragged = smoothPairs(2, 4, 9);
    ragged[1] = {
      name: "odd",
      input: { h: 8, w: 8, data: new Float64Array(64) },
      target: { h: 8, w: 8, data: new Float64Array(64) },
    };
    expect(() => train(cfg, ragged, tinyArch())).toThrow(/expected 4x4/);
    const odd = [
      {
        name: "odd",
        input: { h: 5, w: 4, data: new Float64Array(20) },
        target: { h: 5, w: 4, data: new Float64Array(20) },
      },
    ];
    expect(() => train(cfg, odd, tinyArch())).toThrow(/divisible/);
  });
});
