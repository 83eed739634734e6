/**
 * The training loop: SGD with momentum, per-epoch learning-rate decay,
 * mandatory global gradient clipping, and smooth L1 loss.
 *
 * Stock hyperparameters: batch size 8, learning rate 1e-2, momentum 0.99,
 * decay 0.99 applied at each epoch's end, gradient norms clipped to 1.0,
 * loss knee beta 0.1. Desk-scale defaults run 50 epochs; full-scale
 * training uses 350.
 */

import { ArchConfig, downsampleFactor } from "./arch.js";
import { Image2d, Params, forwardTrain, initParams } from "./network.js";
import { act } from "./ops.js";
import { smoothL1 } from "./loss.js";
import { Sgd, clipGradNorm } from "./optimizer.js";
import { Rng } from "./tensor.js";

export interface TrainConfig {
  epochs: number;
  batchSize: number;
  lr: number;
  momentum: number;
  lrDecayPerEpoch: number;
  gradClipNorm: number;
  smoothL1Beta: number;
  seed: number;
}

export const DESK_EPOCHS = 50;
export const FULL_SCALE_EPOCHS = 350;

export function deskConfig(overrides: Partial<TrainConfig> = {}): TrainConfig {
  return {
    epochs: DESK_EPOCHS,
    batchSize: 8,
    lr: 1e-2,
    momentum: 0.99,
    lrDecayPerEpoch: 0.99,
    gradClipNorm: 1.0,
    smoothL1Beta: 0.1,
    seed: 0,
    ...overrides,
  };
}

/** Raised when the loss leaves the reals; carries the offending epoch. */
export class TrainingError extends Error {
  readonly epoch: number;

  constructor(message: string, epoch: number) {
    super(message);
    this.epoch = epoch;
  }
}

export function validateTrainConfig(cfg: TrainConfig): void {
  if (!Number.isInteger(cfg.epochs) || cfg.epochs < 1) {
    throw new Error(`epochs must be a positive integer, got ${cfg.epochs}`);
  }
  if (!Number.isInteger(cfg.batchSize) || cfg.batchSize < 1) {
    throw new Error(`batchSize must be a positive integer, got ${cfg.batchSize}`);
  }
  // lr = 0 is the documented zero-step case; negatives are rejected
  if (!(cfg.lr >= 0) || !Number.isFinite(cfg.lr)) {
    throw new Error(`lr must be >= 0, got ${cfg.lr}`);
  }
  if (!(cfg.momentum >= 0 && cfg.momentum < 1)) {
    throw new Error(`momentum must be in [0, 1), got ${cfg.momentum}`);
  }
  if (!(cfg.lrDecayPerEpoch > 0)) {
    throw new Error(`lrDecayPerEpoch must be > 0, got ${cfg.lrDecayPerEpoch}`);
  }
  if (!(cfg.gradClipNorm > 0)) {
    throw new Error(`gradClipNorm must be > 0, got ${cfg.gradClipNorm}`);
  }
  if (!(cfg.smoothL1Beta > 0)) {
    throw new Error(`smoothL1Beta must be > 0, got ${cfg.smoothL1Beta}`);
  }
  if (!Number.isInteger(cfg.seed)) {
    throw new Error(`seed must be an integer, got ${cfg.seed}`);
  }
}

export interface TrainingPair {
  name: string;
  input: Image2d;
  target: Image2d;
}

export interface TrainResult {
  /** Final parameters, including the batch-norm running statistics. */
  params: Params;
  /** Mean smooth-L1 training loss per epoch, in epoch order. */
  epochLosses: number[];
}

export type EpochHook = (epoch: number, loss: number, lr: number) => void;

export function train(
  cfg: TrainConfig,
  pairs: TrainingPair[],
  arch: ArchConfig,
  onEpoch?: EpochHook,
): TrainResult {
  validateTrainConfig(cfg);
  if (pairs.length === 0) {
    throw new Error("cannot train on an empty dataset");
  }
  const { h, w } = pairs[0].input;
  const factor = downsampleFactor(arch);
  if (h % factor !== 0 || w % factor !== 0) {
    throw new Error(`image sides (${h}, ${w}) must be divisible by the downsample factor ${factor}`);
  }
  for (const pair of pairs) {
    for (const [role, img] of [["input", pair.input], ["target", pair.target]] as const) {
      if (img.h !== h || img.w !== w) {
        throw new Error(
          `${pair.name}: ${role} is ${img.h}x${img.w}, expected ${h}x${w} like the first pair`,
        );
      }
    }
  }
  const params = initParams(arch, cfg.seed);
  const sgd = new Sgd(cfg.momentum);
  const shuffleRng = new Rng(cfg.seed + 0x5eed);
  const epochLosses: number[] = [];
  let lr = cfg.lr;
  const order = pairs.map((_, i) => i);
  for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
    shuffleRng.shuffle(order);
    let lossSum = 0;
    let seen = 0;
    for (let start = 0; start < order.length; start += cfg.batchSize) {
      const idxs = order.slice(start, start + cfg.batchSize);
      const x = act(idxs.length, 1, h, w);
      const t = act(idxs.length, 1, h, w);
      idxs.forEach((pairIdx, slot) => {
        x.data.set(pairs[pairIdx].input.data, slot * h * w);
        t.data.set(pairs[pairIdx].target.data, slot * h * w);
      });
      const fwd = forwardTrain(arch, params, x);
      const { loss, grad } = smoothL1(fwd.out.data, t.data, cfg.smoothL1Beta);
      if (!Number.isFinite(loss)) {
        throw new TrainingError(`non-finite loss at epoch ${epoch}`, epoch);
      }
      const grads = fwd.backward({ n: idxs.length, c: 1, h, w, data: grad });
      clipGradNorm(grads, cfg.gradClipNorm);
      sgd.step(params, grads, lr);
      lossSum += loss * idxs.length;
      seen += idxs.length;
    }
    const epochLoss = lossSum / seen;
    epochLosses.push(epochLoss);
    if (onEpoch) {
      onEpoch(epoch, epochLoss, lr);
    }
    lr *= cfg.lrDecayPerEpoch;
  }
  return { params, epochLosses };
}
