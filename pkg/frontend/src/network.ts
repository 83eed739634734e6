/**
 * Network assembly: encoder -> skip taps -> decoder -> final head.
 *
 * The block wiring mirrors the inference engine: stem Conv + BN + SiLU,
 * MBConv (expand, depthwise, squeeze-excitation, linear project, optional
 * identity), DoubleConv with ReLU, decoder levels of bilinear upsample +
 * concat(skip, x) + DoubleConv, and a final 3x3 conv + ReLU. Training mode
 * uses batch statistics and maintains the running estimates; inference
 * mode consumes the running statistics exactly like that engine.
 */

import {
  ArchConfig,
  LayerConfig,
  downsampleFactor,
  expandedCh,
  isTrainable,
  residualActive,
  seCh,
  weightManifest,
} from "./arch.js";
import {
  Act,
  act,
  addInPlace,
  batchNormBackward,
  batchNormInfer,
  batchNormTrainForward,
  bilinearUp2xBackward,
  bilinearUp2xForward,
  concatChannels,
  convBackward,
  convForward,
  reluBackward,
  reluForward,
  seBackward,
  seForward,
  siluBackward,
  siluForward,
  splitChannels,
} from "./ops.js";
import { Rng, Tensor, numel } from "./tensor.js";

export type Params = Map<string, Tensor>;
export type Grads = Map<string, Float64Array>;

export function getParam(params: Params, name: string): Tensor {
  const p = params.get(name);
  if (!p) {
    throw new Error(`missing parameter ${JSON.stringify(name)}`);
  }
  return p;
}

function setGrad(grads: Grads, name: string, g: Float64Array): void {
  if (grads.has(name)) {
    throw new Error(`duplicate gradient for ${JSON.stringify(name)}`);
  }
  grads.set(name, g);
}

/** He-style random init, deterministic under the seed. */
export function initParams(arch: ArchConfig, seed = 0): Params {
  const rng = new Rng(seed);
  const params: Params = new Map();
  for (const [name, shape] of weightManifest(arch)) {
    const data = new Float64Array(numel(shape));
    if (name.endsWith(".weight")) {
      const fanIn = shape.slice(1).reduce((acc, d) => acc * d, 1);
      const std = Math.sqrt(2 / fanIn);
      for (let i = 0; i < data.length; i++) {
        data[i] = rng.gauss() * std;
      }
    } else if (name.endsWith(".gamma") || name.endsWith(".var")) {
      data.fill(1);
    }
    params.set(name, { shape, data });
  }
  return params;
}

type BackFn = (dy: Act, grads: Grads) => Act;

interface TrainContext {
  params: Params;
  tape: BackFn[];
}

function convBnTrain(
  ctx: TrainContext,
  x: Act,
  prefix: string,
  stride = 1,
  groups = 1,
): Act {
  const w = getParam(ctx.params, `${prefix}.weight`);
  const b = getParam(ctx.params, `${prefix}.bias`);
  const gamma = getParam(ctx.params, `${prefix}_bn.gamma`);
  const beta = getParam(ctx.params, `${prefix}_bn.beta`);
  const mean = getParam(ctx.params, `${prefix}_bn.mean`);
  const variance = getParam(ctx.params, `${prefix}_bn.var`);
  const conv = convForward(x, w.data, w.shape, b.data, stride, groups);
  const bn = batchNormTrainForward(conv.y, gamma.data, beta.data, mean.data, variance.data);
  ctx.tape.push((dy, grads) => {
    const bnGrads = batchNormBackward(bn.cache, dy);
    setGrad(grads, `${prefix}_bn.gamma`, bnGrads.dgamma);
    setGrad(grads, `${prefix}_bn.beta`, bnGrads.dbeta);
    const convGrads = convBackward(conv.cache, bnGrads.dx);
    setGrad(grads, `${prefix}.weight`, convGrads.dw);
    setGrad(grads, `${prefix}.bias`, convGrads.db);
    return convGrads.dx;
  });
  return bn.y;
}

function siluTrain(ctx: TrainContext, x: Act): Act {
  const { y, cache } = siluForward(x);
  ctx.tape.push((dy) => siluBackward(cache, dy));
  return y;
}

function reluTrain(ctx: TrainContext, x: Act): Act {
  const { y, cache } = reluForward(x);
  ctx.tape.push((dy) => reluBackward(cache, dy));
  return y;
}

function mbconvTrain(ctx: TrainContext, x: Act, prefix: string, layer: LayerConfig): Act {
  const residual = residualActive(layer);
  const residualMark = residual ? ctx.tape.length : -1;
  let out = x;
  if (layer.expansion !== 1) {
    out = siluTrain(ctx, convBnTrain(ctx, out, `${prefix}.expand`));
  }
  const exp = expandedCh(layer);
  out = siluTrain(ctx, convBnTrain(ctx, out, `${prefix}.depthwise`, layer.stride, exp));
  const wr = getParam(ctx.params, `${prefix}.se.reduce.weight`);
  const br = getParam(ctx.params, `${prefix}.se.reduce.bias`);
  const we = getParam(ctx.params, `${prefix}.se.expand.weight`);
  const be = getParam(ctx.params, `${prefix}.se.expand.bias`);
  const se = seForward(out, wr.data, br.data, we.data, be.data, seCh(layer));
  ctx.tape.push((dy, grads) => {
    const g = seBackward(se.cache, dy);
    setGrad(grads, `${prefix}.se.reduce.weight`, g.dwReduce);
    setGrad(grads, `${prefix}.se.reduce.bias`, g.dbReduce);
    setGrad(grads, `${prefix}.se.expand.weight`, g.dwExpand);
    setGrad(grads, `${prefix}.se.expand.bias`, g.dbExpand);
    return g.dx;
  });
  out = convBnTrain(ctx, se.y, `${prefix}.project`);
  if (residual) {
    addInPlace(out, x);
    // fold the identity branch into the chain: run the inner blocks'
    // backward, then add the shortcut gradient that bypasses them
    const inner = ctx.tape.splice(residualMark);
    ctx.tape.push((dy, grads) => {
      let g = dy;
      for (let i = inner.length - 1; i >= 0; i--) {
        g = inner[i](g, grads);
      }
      addInPlace(g, dy);
      return g;
    });
  }
  return out;
}

function doubleConvTrain(ctx: TrainContext, x: Act, prefix: string, stride = 1): Act {
  let out = reluTrain(ctx, convBnTrain(ctx, x, `${prefix}.conv1`, stride));
  out = reluTrain(ctx, convBnTrain(ctx, out, `${prefix}.conv2`));
  return out;
}

export interface TrainForward {
  out: Act;
  /** Run the reverse pass; dout must match the forward output shape. */
  backward(dout: Act): Grads;
}

export function forwardTrain(arch: ArchConfig, params: Params, x: Act): TrainForward {
  const factor = downsampleFactor(arch);
  if (x.h % factor !== 0 || x.w % factor !== 0) {
    throw new Error(
      `input sides (${x.h}, ${x.w}) must be divisible by the downsample factor ${factor}`,
    );
  }
  const ctx: TrainContext = { params, tape: [] };
  const tapGrads = new Map<number, Act>();
  const tapSet = new Set(arch.skipTaps);
  const taps = new Map<number, Act>();
  let out = x;
  arch.encoder.forEach((layer, idx) => {
    const i = idx + 1;
    const prefix = `enc${i}`;
    if (layer.kind === "Conv") {
      out = siluTrain(ctx, convBnTrain(ctx, out, `${prefix}.conv`, layer.stride));
    } else if (layer.kind === "DoubleConv") {
      out = doubleConvTrain(ctx, out, prefix, layer.stride);
    } else {
      out = mbconvTrain(ctx, out, prefix, layer);
    }
    if (tapSet.has(i)) {
      taps.set(i, out);
      // collect any gradient flowing into this tap from the decoder
      ctx.tape.push((dy) => {
        const extra = tapGrads.get(i);
        if (extra) {
          addInPlace(dy, extra);
        }
        return dy;
      });
    }
  });
  const reversedTaps = [...arch.skipTaps].reverse();
  arch.decoder.forEach((lvl, idx) => {
    const tap = reversedTaps[idx];
    const skip = taps.get(tap)!;
    const up = bilinearUp2xForward(out);
    const merged = concatChannels(skip, up.y);
    ctx.tape.push((dy) => {
      const { da, db } = splitChannels(dy, skip.c);
      const prev = tapGrads.get(tap);
      if (prev) {
        addInPlace(prev, da);
      } else {
        tapGrads.set(tap, da);
      }
      return bilinearUp2xBackward(up.cache, db);
    });
    out = doubleConvTrain(ctx, merged, `dec${idx + 1}`);
  });
  const fw = getParam(params, "final.weight");
  const fb = getParam(params, "final.bias");
  const conv = convForward(out, fw.data, fw.shape, fb.data);
  ctx.tape.push((dy, grads) => {
    const g = convBackward(conv.cache, dy);
    setGrad(grads, "final.weight", g.dw);
    setGrad(grads, "final.bias", g.db);
    return g.dx;
  });
  out = reluTrain(ctx, conv.y);

  const tape = ctx.tape;
  return {
    out,
    backward(dout: Act): Grads {
      const grads: Grads = new Map();
      let dy = dout;
      for (let i = tape.length - 1; i >= 0; i--) {
        dy = tape[i](dy, grads);
      }
      for (const name of params.keys()) {
        if (isTrainable(name) && !grads.has(name)) {
          throw new Error(`backward produced no gradient for ${JSON.stringify(name)}`);
        }
      }
      return grads;
    },
  };
}

// ---------------------------------------------------------------------------
// inference mode

function convBnInfer(params: Params, x: Act, prefix: string, stride = 1, groups = 1): Act {
  const w = getParam(params, `${prefix}.weight`);
  const b = getParam(params, `${prefix}.bias`);
  const { y } = convForward(x, w.data, w.shape, b.data, stride, groups);
  return batchNormInfer(
    y,
    getParam(params, `${prefix}_bn.gamma`).data,
    getParam(params, `${prefix}_bn.beta`).data,
    getParam(params, `${prefix}_bn.mean`).data,
    getParam(params, `${prefix}_bn.var`).data,
  );
}

function siluInfer(x: Act): Act {
  return siluForward(x).y;
}

function reluInfer(x: Act): Act {
  return reluForward(x).y;
}

function mbconvInfer(params: Params, x: Act, prefix: string, layer: LayerConfig): Act {
  let out = x;
  if (layer.expansion !== 1) {
    out = siluInfer(convBnInfer(params, out, `${prefix}.expand`));
  }
  const exp = expandedCh(layer);
  out = siluInfer(convBnInfer(params, out, `${prefix}.depthwise`, layer.stride, exp));
  out = seForward(
    out,
    getParam(params, `${prefix}.se.reduce.weight`).data,
    getParam(params, `${prefix}.se.reduce.bias`).data,
    getParam(params, `${prefix}.se.expand.weight`).data,
    getParam(params, `${prefix}.se.expand.bias`).data,
    seCh(layer),
  ).y;
  out = convBnInfer(params, out, `${prefix}.project`);
  if (residualActive(layer)) {
    addInPlace(out, x);
  }
  return out;
}

function doubleConvInfer(params: Params, x: Act, prefix: string, stride = 1): Act {
  let out = reluInfer(convBnInfer(params, x, `${prefix}.conv1`, stride));
  return reluInfer(convBnInfer(params, out, `${prefix}.conv2`));
}

export interface Image2d {
  h: number;
  w: number;
  data: Float64Array;
}

/** Run the network on one 2D image using the running batch-norm stats. */
export function forwardInfer(arch: ArchConfig, params: Params, image: Image2d): Float64Array {
  const factor = downsampleFactor(arch);
  if (image.h % factor !== 0 || image.w % factor !== 0) {
    throw new Error(
      `input sides (${image.h}, ${image.w}) must be divisible by the downsample factor ${factor}`,
    );
  }
  let out = act(1, 1, image.h, image.w);
  out.data.set(image.data);
  if (arch.inputNorm === "max_abs") {
    let peak = 0;
    for (let i = 0; i < out.data.length; i++) {
      const v = Math.abs(out.data[i]);
      if (v > peak) peak = v;
    }
    if (peak > 0) {
      for (let i = 0; i < out.data.length; i++) {
        out.data[i] /= peak;
      }
    }
  }
  const taps = new Map<number, Act>();
  const tapSet = new Set(arch.skipTaps);
  arch.encoder.forEach((layer, idx) => {
    const prefix = `enc${idx + 1}`;
    if (layer.kind === "Conv") {
      out = siluInfer(convBnInfer(params, out, `${prefix}.conv`, layer.stride));
    } else if (layer.kind === "DoubleConv") {
      out = doubleConvInfer(params, out, prefix, layer.stride);
    } else {
      out = mbconvInfer(params, out, prefix, layer);
    }
    if (tapSet.has(idx + 1)) {
      taps.set(idx + 1, out);
    }
  });
  const reversedTaps = [...arch.skipTaps].reverse();
  arch.decoder.forEach((_lvl, idx) => {
    const skip = taps.get(reversedTaps[idx])!;
    const up = bilinearUp2xForward(out).y;
    out = doubleConvInfer(params, concatChannels(skip, up), `dec${idx + 1}`);
  });
  const fw = getParam(params, "final.weight");
  const fb = getParam(params, "final.bias");
  out = reluInfer(convForward(out, fw.data, fw.shape, fb.data).y);
  return out.data.slice();
}
