/**
 * Smooth L1 (Huber-style) training loss.
 *
 * Per element, with d = pred - target: 0.5 * d^2 / beta when |d| < beta,
 * otherwise |d| - 0.5 * beta; the loss is the mean over elements, so it is
 * continuous at the knee and equals mean |d| - 0.5 * beta once every
 * residual clears the knee.
 */

export interface LossResult {
  loss: number;
  /** d(loss)/d(pred), same length as pred. */
  grad: Float64Array;
}

export function smoothL1(
  pred: Float64Array,
  target: Float64Array,
  beta: number,
): LossResult {
  if (beta <= 0) {
    throw new Error(`beta must be > 0, got ${beta}`);
  }
  if (pred.length !== target.length) {
    throw new Error(`shape mismatch: pred has ${pred.length} elements, target has ${target.length}`);
  }
  const n = pred.length;
  if (n === 0) {
    throw new Error("cannot take the loss of empty tensors");
  }
  const grad = new Float64Array(n);
  let total = 0;
  for (let i = 0; i < n; i++) {
    const d = pred[i] - target[i];
    const ad = Math.abs(d);
    if (ad < beta) {
      total += (0.5 * d * d) / beta;
      grad[i] = d / beta / n;
    } else {
      total += ad - 0.5 * beta;
      grad[i] = (d > 0 ? 1 : -1) / n;
    }
  }
  return { loss: total / n, grad };
}
