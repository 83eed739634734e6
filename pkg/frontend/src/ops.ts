/**
 * Differentiable numerical primitives for training.
 *
 * Activations are batched channel-first blocks [n, c, h, w] over one flat
 * Float64Array. Every forward returns the output plus a cache; the matching
 * backward consumes the cache and the upstream gradient and returns input
 * and parameter gradients. Forward math mirrors the inference engine:
 * cross-correlation with 'same' padding (k // 2), batch-norm eps 1e-3,
 * SiLU/ReLU/sigmoid, squeeze-excitation gating, and half-pixel-center
 * bilinear upsampling with border clamp.
 */

import { gemm, gemmABtAcc, transpose } from "./gemm.js";

export const BN_EPS = 1e-3;
/** Fraction of the batch statistic blended into the running estimate. */
export const BN_MOMENTUM = 0.1;

export interface Act {
  n: number;
  c: number;
  h: number;
  w: number;
  data: Float64Array;
}

export function act(n: number, c: number, h: number, w: number): Act {
  return { n, c, h, w, data: new Float64Array(n * c * h * w) };
}

export function actLike(x: Act): Act {
  return act(x.n, x.c, x.h, x.w);
}

function outSide(side: number, stride: number): number {
  // 'same' padding k // 2 yields ceil(side / stride) for both k = 1 and k = 3
  return Math.ceil(side / stride);
}

export function sigmoid(v: number): number {
  return 1 / (1 + Math.exp(-v));
}

// ---------------------------------------------------------------------------
// convolution

export interface ConvCache {
  x: Act;
  y: Act;
  weight: Float64Array;
  outCh: number;
  inPerGroup: number;
  kernel: number;
  stride: number;
  groups: number;
}

export interface ConvGrads {
  dx: Act;
  dw: Float64Array;
  db: Float64Array;
}

/**
 * 2D cross-correlation with 'same' padding; weight is [outCh, inCh/groups,
 * k, k]. Supported configurations are the ones the architecture generates:
 * 1x1 with groups 1 and stride 1, 3x3 with groups 1, and 3x3 depthwise.
 */
export function convForward(
  x: Act,
  weight: Float64Array,
  wShape: readonly number[],
  bias: Float64Array | null,
  stride = 1,
  groups = 1,
): { y: Act; cache: ConvCache } {
  const [outCh, inPerGroup, k, kw] = wShape;
  if (wShape.length !== 4 || k !== kw) {
    throw new Error(`weight must have shape [outCh, inCh/groups, k, k], got [${wShape.join(", ")}]`);
  }
  if (groups < 1 || x.c % groups !== 0 || outCh % groups !== 0) {
    throw new Error(`groups=${groups} must divide inCh=${x.c} and outCh=${outCh}`);
  }
  if (inPerGroup !== x.c / groups) {
    throw new Error(`weight expects ${inPerGroup} channels per group, input provides ${x.c / groups}`);
  }
  if (stride !== 1 && stride !== 2) {
    throw new Error(`stride must be 1 or 2, got ${stride}`);
  }
  const y = act(x.n, outCh, outSide(x.h, stride), outSide(x.w, stride));
  if (k === 1 && groups === 1 && stride === 1) {
    pointwiseForward(x, weight, outCh, y);
  } else if (k === 3 && groups === x.c && outCh === x.c) {
    depthwiseForward(x, weight, stride, y);
  } else if (k === 3 && groups === 1) {
    im2colForward(x, weight, outCh, stride, y);
  } else {
    throw new Error(`unsupported convolution: k=${k}, groups=${groups}, stride=${stride}`);
  }
  if (bias !== null) {
    addChannelBias(y, bias);
  }
  return { y, cache: { x, y, weight, outCh, inPerGroup, kernel: k, stride, groups } };
}

export function convBackward(cache: ConvCache, dy: Act): ConvGrads {
  const { x, weight, outCh, kernel, stride, groups } = cache;
  const dx = actLike(x);
  const dw = new Float64Array(weight.length);
  const db = new Float64Array(outCh);
  sumChannelGrad(dy, db);
  if (kernel === 1 && groups === 1 && stride === 1) {
    pointwiseBackward(x, weight, outCh, dy, dx, dw);
  } else if (kernel === 3 && groups === x.c && outCh === x.c) {
    depthwiseBackward(x, weight, stride, dy, dx, dw);
  } else {
    im2colBackward(x, weight, outCh, stride, dy, dx, dw);
  }
  return { dx, dw, db };
}

function addChannelBias(y: Act, bias: Float64Array): void {
  const hw = y.h * y.w;
  for (let n = 0; n < y.n; n++) {
    for (let c = 0; c < y.c; c++) {
      const base = (n * y.c + c) * hw;
      const bv = bias[c];
      for (let i = 0; i < hw; i++) {
        y.data[base + i] += bv;
      }
    }
  }
}

function sumChannelGrad(dy: Act, db: Float64Array): void {
  const hw = dy.h * dy.w;
  for (let n = 0; n < dy.n; n++) {
    for (let c = 0; c < dy.c; c++) {
      const base = (n * dy.c + c) * hw;
      let s = 0;
      for (let i = 0; i < hw; i++) {
        s += dy.data[base + i];
      }
      db[c] += s;
    }
  }
}

function pointwiseForward(x: Act, weight: Float64Array, outCh: number, y: Act): void {
  const hw = x.h * x.w;
  for (let n = 0; n < x.n; n++) {
    const xOff = n * x.c * hw;
    const yOff = n * outCh * hw;
    gemm(outCh, x.c, hw, weight, x.data.subarray(xOff, xOff + x.c * hw), y.data.subarray(yOff, yOff + outCh * hw));
  }
}

function pointwiseBackward(
  x: Act,
  weight: Float64Array,
  outCh: number,
  dy: Act,
  dx: Act,
  dw: Float64Array,
): void {
  const hw = x.h * x.w;
  const wT = new Float64Array(weight.length);
  transpose(outCh, x.c, weight, wT);
  for (let n = 0; n < x.n; n++) {
    const xOff = n * x.c * hw;
    const yOff = n * outCh * hw;
    const xSlice = x.data.subarray(xOff, xOff + x.c * hw);
    const dySlice = dy.data.subarray(yOff, yOff + outCh * hw);
    gemmABtAcc(outCh, hw, x.c, dySlice, xSlice, dw);
    gemm(x.c, outCh, hw, wT, dySlice, dx.data.subarray(xOff, xOff + x.c * hw));
  }
}

function depthwiseForward(x: Act, weight: Float64Array, stride: number, y: Act): void {
  const { h, w } = x;
  const hw = h * w;
  const oHw = y.h * y.w;
  for (let n = 0; n < x.n; n++) {
    for (let c = 0; c < x.c; c++) {
      const xBase = (n * x.c + c) * hw;
      const yBase = (n * x.c + c) * oHw;
      const wBase = c * 9;
      for (let oh = 0; oh < y.h; oh++) {
        const ihMid = oh * stride;
        for (let ow = 0; ow < y.w; ow++) {
          const iwMid = ow * stride;
          let s = 0;
          for (let ki = 0; ki < 3; ki++) {
            const ih = ihMid + ki - 1;
            if (ih < 0 || ih >= h) continue;
            const rowBase = xBase + ih * w;
            for (let kj = 0; kj < 3; kj++) {
              const iw = iwMid + kj - 1;
              if (iw < 0 || iw >= w) continue;
              s += x.data[rowBase + iw] * weight[wBase + ki * 3 + kj];
            }
          }
          y.data[yBase + oh * y.w + ow] = s;
        }
      }
    }
  }
}

function depthwiseBackward(
  x: Act,
  weight: Float64Array,
  stride: number,
  dy: Act,
  dx: Act,
  dw: Float64Array,
): void {
  const { h, w } = x;
  const hw = h * w;
  const oH = dy.h;
  const oW = dy.w;
  const oHw = oH * oW;
  for (let n = 0; n < x.n; n++) {
    for (let c = 0; c < x.c; c++) {
      const xBase = (n * x.c + c) * hw;
      const yBase = (n * x.c + c) * oHw;
      const wBase = c * 9;
      for (let oh = 0; oh < oH; oh++) {
        const ihMid = oh * stride;
        for (let ow = 0; ow < oW; ow++) {
          const iwMid = ow * stride;
          const g = dy.data[yBase + oh * oW + ow];
          if (g === 0) continue;
          for (let ki = 0; ki < 3; ki++) {
            const ih = ihMid + ki - 1;
            if (ih < 0 || ih >= h) continue;
            const rowBase = xBase + ih * w;
            for (let kj = 0; kj < 3; kj++) {
              const iw = iwMid + kj - 1;
              if (iw < 0 || iw >= w) continue;
              dw[wBase + ki * 3 + kj] += x.data[rowBase + iw] * g;
              dx.data[rowBase + iw] += weight[wBase + ki * 3 + kj] * g;
            }
          }
        }
      }
    }
  }
}

/** Fill col [inCh * 9, outH * outW] from one sample; pad = 1. */
function im2col(
  x: Act,
  n: number,
  stride: number,
  outH: number,
  outW: number,
  col: Float64Array,
): void {
  col.fill(0);
  const { c: inCh, h, w } = x;
  const hw = h * w;
  const len = outH * outW;
  for (let c = 0; c < inCh; c++) {
    const xBase = (n * inCh + c) * hw;
    for (let ki = 0; ki < 3; ki++) {
      for (let kj = 0; kj < 3; kj++) {
        const rowBase = (c * 9 + ki * 3 + kj) * len;
        const owLo = Math.max(0, Math.ceil((1 - kj) / stride));
        const owHi = Math.min(outW - 1, Math.floor((w - kj) / stride));
        for (let oh = 0; oh < outH; oh++) {
          const ih = oh * stride + ki - 1;
          if (ih < 0 || ih >= h) continue;
          const src = xBase + ih * w + kj - 1;
          const dst = rowBase + oh * outW;
          for (let ow = owLo; ow <= owHi; ow++) {
            col[dst + ow] = x.data[src + ow * stride];
          }
        }
      }
    }
  }
}

/** Scatter-add dcol [inCh * 9, outH * outW] back into sample n of dx. */
function col2imAdd(
  dx: Act,
  n: number,
  stride: number,
  outH: number,
  outW: number,
  dcol: Float64Array,
): void {
  const { c: inCh, h, w } = dx;
  const hw = h * w;
  const len = outH * outW;
  for (let c = 0; c < inCh; c++) {
    const xBase = (n * inCh + c) * hw;
    for (let ki = 0; ki < 3; ki++) {
      for (let kj = 0; kj < 3; kj++) {
        const rowBase = (c * 9 + ki * 3 + kj) * len;
        const owLo = Math.max(0, Math.ceil((1 - kj) / stride));
        const owHi = Math.min(outW - 1, Math.floor((w - kj) / stride));
        for (let oh = 0; oh < outH; oh++) {
          const ih = oh * stride + ki - 1;
          if (ih < 0 || ih >= h) continue;
          const dst = xBase + ih * w + kj - 1;
          const src = rowBase + oh * outW;
          for (let ow = owLo; ow <= owHi; ow++) {
            dx.data[dst + ow * stride] += dcol[src + ow];
          }
        }
      }
    }
  }
}

function im2colForward(x: Act, weight: Float64Array, outCh: number, stride: number, y: Act): void {
  const len = y.h * y.w;
  const kDim = x.c * 9;
  const col = new Float64Array(kDim * len);
  for (let n = 0; n < x.n; n++) {
    im2col(x, n, stride, y.h, y.w, col);
    const yOff = n * outCh * len;
    gemm(outCh, kDim, len, weight, col, y.data.subarray(yOff, yOff + outCh * len));
  }
}

function im2colBackward(
  x: Act,
  weight: Float64Array,
  outCh: number,
  stride: number,
  dy: Act,
  dx: Act,
  dw: Float64Array,
): void {
  const len = dy.h * dy.w;
  const kDim = x.c * 9;
  const col = new Float64Array(kDim * len);
  const dcol = new Float64Array(kDim * len);
  const wT = new Float64Array(weight.length);
  transpose(outCh, kDim, weight, wT);
  for (let n = 0; n < x.n; n++) {
    const yOff = n * outCh * len;
    const dySlice = dy.data.subarray(yOff, yOff + outCh * len);
    im2col(x, n, stride, dy.h, dy.w, col);
    gemmABtAcc(outCh, len, kDim, dySlice, col, dw);
    gemm(kDim, outCh, len, wT, dySlice, dcol);
    col2imAdd(dx, n, stride, dy.h, dy.w, dcol);
  }
}

// ---------------------------------------------------------------------------
// batch normalization

export interface BnCache {
  xhat: Act;
  invStd: Float64Array;
  gamma: Float64Array;
}

export interface BnGrads {
  dx: Act;
  dgamma: Float64Array;
  dbeta: Float64Array;
}

/**
 * Training-mode batch norm: normalize with the batch statistics (biased
 * variance, eps 1e-3) and fold the batch into the running estimates the
 * way the inference engine will consume them (running var is unbiased).
 */
export function batchNormTrainForward(
  x: Act,
  gamma: Float64Array,
  beta: Float64Array,
  runningMean: Float64Array,
  runningVar: Float64Array,
  momentum = BN_MOMENTUM,
): { y: Act; cache: BnCache } {
  const hw = x.h * x.w;
  const m = x.n * hw;
  const y = actLike(x);
  const xhat = actLike(x);
  const invStd = new Float64Array(x.c);
  for (let c = 0; c < x.c; c++) {
    let sum = 0;
    for (let n = 0; n < x.n; n++) {
      const base = (n * x.c + c) * hw;
      for (let i = 0; i < hw; i++) {
        sum += x.data[base + i];
      }
    }
    const mean = sum / m;
    let sq = 0;
    for (let n = 0; n < x.n; n++) {
      const base = (n * x.c + c) * hw;
      for (let i = 0; i < hw; i++) {
        const d = x.data[base + i] - mean;
        sq += d * d;
      }
    }
    const biasedVar = sq / m;
    const inv = 1 / Math.sqrt(biasedVar + BN_EPS);
    invStd[c] = inv;
    const g = gamma[c];
    const b = beta[c];
    for (let n = 0; n < x.n; n++) {
      const base = (n * x.c + c) * hw;
      for (let i = 0; i < hw; i++) {
        const xh = (x.data[base + i] - mean) * inv;
        xhat.data[base + i] = xh;
        y.data[base + i] = g * xh + b;
      }
    }
    const unbiasedVar = m > 1 ? sq / (m - 1) : biasedVar;
    runningMean[c] = (1 - momentum) * runningMean[c] + momentum * mean;
    runningVar[c] = (1 - momentum) * runningVar[c] + momentum * unbiasedVar;
  }
  return { y, cache: { xhat, invStd, gamma } };
}

/** Inference-mode batch norm: gamma * (x - mean) / sqrt(var + eps) + beta. */
export function batchNormInfer(
  x: Act,
  gamma: Float64Array,
  beta: Float64Array,
  mean: Float64Array,
  variance: Float64Array,
): Act {
  const hw = x.h * x.w;
  const y = actLike(x);
  for (let c = 0; c < x.c; c++) {
    const scale = gamma[c] / Math.sqrt(variance[c] + BN_EPS);
    const shift = beta[c] - scale * mean[c];
    for (let n = 0; n < x.n; n++) {
      const base = (n * x.c + c) * hw;
      for (let i = 0; i < hw; i++) {
        y.data[base + i] = x.data[base + i] * scale + shift;
      }
    }
  }
  return y;
}

export function batchNormBackward(cache: BnCache, dy: Act): BnGrads {
  const { xhat, invStd, gamma } = cache;
  const hw = dy.h * dy.w;
  const m = dy.n * hw;
  const dx = actLike(dy);
  const dgamma = new Float64Array(dy.c);
  const dbeta = new Float64Array(dy.c);
  for (let c = 0; c < dy.c; c++) {
    let dg = 0;
    let db = 0;
    for (let n = 0; n < dy.n; n++) {
      const base = (n * dy.c + c) * hw;
      for (let i = 0; i < hw; i++) {
        dg += dy.data[base + i] * xhat.data[base + i];
        db += dy.data[base + i];
      }
    }
    dgamma[c] = dg;
    dbeta[c] = db;
    const k = gamma[c] * invStd[c];
    const dgOverM = dg / m;
    const dbOverM = db / m;
    for (let n = 0; n < dy.n; n++) {
      const base = (n * dy.c + c) * hw;
      for (let i = 0; i < hw; i++) {
        dx.data[base + i] =
          k * (dy.data[base + i] - xhat.data[base + i] * dgOverM - dbOverM);
      }
    }
  }
  return { dx, dgamma, dbeta };
}

// ---------------------------------------------------------------------------
// activations

export function siluForward(x: Act): { y: Act; cache: Act } {
  const y = actLike(x);
  for (let i = 0; i < x.data.length; i++) {
    const v = x.data[i];
    y.data[i] = v / (1 + Math.exp(-v));
  }
  return { y, cache: x };
}

export function siluBackward(x: Act, dy: Act): Act {
  const dx = actLike(x);
  for (let i = 0; i < x.data.length; i++) {
    const v = x.data[i];
    const s = 1 / (1 + Math.exp(-v));
    dx.data[i] = dy.data[i] * s * (1 + v * (1 - s));
  }
  return dx;
}

export function reluForward(x: Act): { y: Act; cache: Act } {
  const y = actLike(x);
  for (let i = 0; i < x.data.length; i++) {
    // Math.max keeps NaN instead of clamping it to zero, so a diverged
    // forward pass surfaces as a non-finite loss rather than silence.
    y.data[i] = Math.max(x.data[i], 0);
  }
  return { y, cache: y };
}

export function reluBackward(y: Act, dy: Act): Act {
  const dx = actLike(y);
  for (let i = 0; i < y.data.length; i++) {
    dx.data[i] = y.data[i] > 0 ? dy.data[i] : 0;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// squeeze-and-excitation

export interface SeCache {
  x: Act;
  z: Float64Array; // [n, c] pooled means
  hPre: Float64Array; // [n, s] reduce pre-activation
  hidden: Float64Array; // [n, s] silu(hPre)
  gate: Float64Array; // [n, c] sigmoid output
  wReduce: Float64Array;
  wExpand: Float64Array;
  seCh: number;
}

export interface SeGrads {
  dx: Act;
  dwReduce: Float64Array;
  dbReduce: Float64Array;
  dwExpand: Float64Array;
  dbExpand: Float64Array;
}

/**
 * Squeeze-and-excitation channel gate: global average pool, reduce with
 * SiLU, expand with sigmoid, then scale the input per channel.
 */
export function seForward(
  x: Act,
  wReduce: Float64Array,
  bReduce: Float64Array,
  wExpand: Float64Array,
  bExpand: Float64Array,
  seChannels: number,
): { y: Act; cache: SeCache } {
  const { n: nBatch, c } = x;
  const hw = x.h * x.w;
  const y = actLike(x);
  const z = new Float64Array(nBatch * c);
  const hPre = new Float64Array(nBatch * seChannels);
  const hidden = new Float64Array(nBatch * seChannels);
  const gate = new Float64Array(nBatch * c);
  for (let n = 0; n < nBatch; n++) {
    for (let ch = 0; ch < c; ch++) {
      const base = (n * c + ch) * hw;
      let s = 0;
      for (let i = 0; i < hw; i++) {
        s += x.data[base + i];
      }
      z[n * c + ch] = s / hw;
    }
    for (let s = 0; s < seChannels; s++) {
      let acc = bReduce[s];
      const wRow = s * c;
      for (let ch = 0; ch < c; ch++) {
        acc += wReduce[wRow + ch] * z[n * c + ch];
      }
      hPre[n * seChannels + s] = acc;
      hidden[n * seChannels + s] = acc / (1 + Math.exp(-acc));
    }
    for (let ch = 0; ch < c; ch++) {
      let acc = bExpand[ch];
      const wRow = ch * seChannels;
      for (let s = 0; s < seChannels; s++) {
        acc += wExpand[wRow + s] * hidden[n * seChannels + s];
      }
      const g = sigmoid(acc);
      gate[n * c + ch] = g;
      const base = (n * c + ch) * hw;
      for (let i = 0; i < hw; i++) {
        y.data[base + i] = x.data[base + i] * g;
      }
    }
  }
  return { y, cache: { x, z, hPre, hidden, gate, wReduce, wExpand, seCh: seChannels } };
}

export function seBackward(cache: SeCache, dy: Act): SeGrads {
  const { x, z, hPre, hidden, gate, wReduce, wExpand, seCh } = cache;
  const { n: nBatch, c } = x;
  const hw = x.h * x.w;
  const dx = actLike(x);
  const dwReduce = new Float64Array(wReduce.length);
  const dbReduce = new Float64Array(seCh);
  const dwExpand = new Float64Array(wExpand.length);
  const dbExpand = new Float64Array(c);
  const dGatePre = new Float64Array(c);
  const dHidden = new Float64Array(seCh);
  const dhPre = new Float64Array(seCh);
  for (let n = 0; n < nBatch; n++) {
    for (let ch = 0; ch < c; ch++) {
      const base = (n * c + ch) * hw;
      const g = gate[n * c + ch];
      let dg = 0;
      for (let i = 0; i < hw; i++) {
        dg += dy.data[base + i] * x.data[base + i];
        dx.data[base + i] = dy.data[base + i] * g;
      }
      dGatePre[ch] = dg * g * (1 - g);
      dbExpand[ch] += dGatePre[ch];
    }
    dHidden.fill(0);
    for (let ch = 0; ch < c; ch++) {
      const wRow = ch * seCh;
      const dgp = dGatePre[ch];
      for (let s = 0; s < seCh; s++) {
        dwExpand[wRow + s] += dgp * hidden[n * seCh + s];
        dHidden[s] += wExpand[wRow + s] * dgp;
      }
    }
    for (let s = 0; s < seCh; s++) {
      const v = hPre[n * seCh + s];
      const sg = 1 / (1 + Math.exp(-v));
      dhPre[s] = dHidden[s] * sg * (1 + v * (1 - sg));
      dbReduce[s] += dhPre[s];
    }
    for (let ch = 0; ch < c; ch++) {
      let dz = 0;
      for (let s = 0; s < seCh; s++) {
        dwReduce[s * c + ch] += dhPre[s] * z[n * c + ch];
        dz += wReduce[s * c + ch] * dhPre[s];
      }
      const spread = dz / hw;
      const base = (n * c + ch) * hw;
      for (let i = 0; i < hw; i++) {
        dx.data[base + i] += spread;
      }
    }
  }
  return { dx, dwReduce, dbReduce, dwExpand, dbExpand };
}

// ---------------------------------------------------------------------------
// resampling and plumbing

interface AxisTaps {
  i0: Int32Array;
  i1: Int32Array;
  frac: Float64Array;
}

function axisTaps(n: number): AxisTaps {
  const i0 = new Int32Array(2 * n);
  const i1 = new Int32Array(2 * n);
  const frac = new Float64Array(2 * n);
  for (let i = 0; i < 2 * n; i++) {
    let src = (i + 0.5) / 2 - 0.5;
    if (src < 0) src = 0;
    if (src > n - 1) src = n - 1;
    const lo = Math.floor(src);
    i0[i] = lo;
    i1[i] = Math.min(lo + 1, n - 1);
    frac[i] = src - lo;
  }
  return { i0, i1, frac };
}

/**
 * Double both spatial dimensions with bilinear interpolation; output pixel
 * i samples input coordinate (i + 0.5) / 2 - 0.5 clamped to the border.
 */
export function bilinearUp2xForward(x: Act): { y: Act; cache: Act } {
  const y = act(x.n, x.c, 2 * x.h, 2 * x.w);
  const rows = axisTaps(x.h);
  const cols = axisTaps(x.w);
  const hw = x.h * x.w;
  const oHw = y.h * y.w;
  for (let n = 0; n < x.n; n++) {
    for (let c = 0; c < x.c; c++) {
      const xBase = (n * x.c + c) * hw;
      const yBase = (n * x.c + c) * oHw;
      for (let oh = 0; oh < y.h; oh++) {
        const r0 = xBase + rows.i0[oh] * x.w;
        const r1 = xBase + rows.i1[oh] * x.w;
        const fr = rows.frac[oh];
        const dst = yBase + oh * y.w;
        for (let ow = 0; ow < y.w; ow++) {
          const c0 = cols.i0[ow];
          const c1 = cols.i1[ow];
          const fc = cols.frac[ow];
          const top = x.data[r0 + c0] * (1 - fc) + x.data[r0 + c1] * fc;
          const bottom = x.data[r1 + c0] * (1 - fc) + x.data[r1 + c1] * fc;
          y.data[dst + ow] = top * (1 - fr) + bottom * fr;
        }
      }
    }
  }
  return { y, cache: x };
}

export function bilinearUp2xBackward(x: Act, dy: Act): Act {
  const dx = actLike(x);
  const rows = axisTaps(x.h);
  const cols = axisTaps(x.w);
  const hw = x.h * x.w;
  const oHw = dy.h * dy.w;
  for (let n = 0; n < x.n; n++) {
    for (let c = 0; c < x.c; c++) {
      const xBase = (n * x.c + c) * hw;
      const yBase = (n * x.c + c) * oHw;
      for (let oh = 0; oh < dy.h; oh++) {
        const r0 = xBase + rows.i0[oh] * x.w;
        const r1 = xBase + rows.i1[oh] * x.w;
        const fr = rows.frac[oh];
        const src = yBase + oh * dy.w;
        for (let ow = 0; ow < dy.w; ow++) {
          const g = dy.data[src + ow];
          if (g === 0) continue;
          const c0 = cols.i0[ow];
          const c1 = cols.i1[ow];
          const fc = cols.frac[ow];
          dx.data[r0 + c0] += g * (1 - fr) * (1 - fc);
          dx.data[r0 + c1] += g * (1 - fr) * fc;
          dx.data[r1 + c0] += g * fr * (1 - fc);
          dx.data[r1 + c1] += g * fr * fc;
        }
      }
    }
  }
  return dx;
}

/** Concatenate along channels; the first argument comes first. */
export function concatChannels(a: Act, b: Act): Act {
  if (a.n !== b.n || a.h !== b.h || a.w !== b.w) {
    throw new Error(
      `cannot concatenate shapes [${a.n}, ${a.c}, ${a.h}, ${a.w}] and ` +
        `[${b.n}, ${b.c}, ${b.h}, ${b.w}]`,
    );
  }
  const y = act(a.n, a.c + b.c, a.h, a.w);
  const hw = a.h * a.w;
  for (let n = 0; n < a.n; n++) {
    y.data.set(a.data.subarray(n * a.c * hw, (n + 1) * a.c * hw), n * y.c * hw);
    y.data.set(b.data.subarray(n * b.c * hw, (n + 1) * b.c * hw), n * y.c * hw + a.c * hw);
  }
  return y;
}

/** Split the gradient of a channel concat back into the two inputs. */
export function splitChannels(dy: Act, cA: number): { da: Act; db: Act } {
  const cB = dy.c - cA;
  const da = act(dy.n, cA, dy.h, dy.w);
  const db = act(dy.n, cB, dy.h, dy.w);
  const hw = dy.h * dy.w;
  for (let n = 0; n < dy.n; n++) {
    const base = n * dy.c * hw;
    da.data.set(dy.data.subarray(base, base + cA * hw), n * cA * hw);
    db.data.set(dy.data.subarray(base + cA * hw, base + dy.c * hw), n * cB * hw);
  }
  return { da, db };
}

export function addInPlace(target: Act, other: Act): void {
  for (let i = 0; i < target.data.length; i++) {
    target.data[i] += other.data[i];
  }
}
