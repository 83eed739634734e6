/**
 * Row-major float64 matrix kernels sized for the training workload.
 *
 * gemm keeps two output rows in flight and streams B four columns at a
 * time, which is the sweet spot for V8 on the GEMM shapes convolution
 * produces here; gemmABt computes against a transposed right factor via
 * contiguous row dot products, covering the weight-gradient contraction
 * without materializing a transpose.
 */

/** c[m, n] = a[m, k] * b[k, n]; c is overwritten. */
export function gemm(
  m: number,
  k: number,
  n: number,
  a: Float64Array,
  b: Float64Array,
  c: Float64Array,
): void {
  c.fill(0, 0, m * n);
  const n4 = n & ~3;
  let i = 0;
  for (; i + 1 < m; i += 2) {
    const r0 = i * n;
    const r1 = r0 + n;
    const a0Row = i * k;
    const a1Row = a0Row + k;
    for (let l = 0; l < k; l++) {
      const a0 = a[a0Row + l];
      const a1 = a[a1Row + l];
      const bRow = l * n;
      let j = 0;
      for (; j < n4; j += 4) {
        const b0 = b[bRow + j];
        const b1 = b[bRow + j + 1];
        const b2 = b[bRow + j + 2];
        const b3 = b[bRow + j + 3];
        c[r0 + j] += a0 * b0;
        c[r0 + j + 1] += a0 * b1;
        c[r0 + j + 2] += a0 * b2;
        c[r0 + j + 3] += a0 * b3;
        c[r1 + j] += a1 * b0;
        c[r1 + j + 1] += a1 * b1;
        c[r1 + j + 2] += a1 * b2;
        c[r1 + j + 3] += a1 * b3;
      }
      for (; j < n; j++) {
        const bv = b[bRow + j];
        c[r0 + j] += a0 * bv;
        c[r1 + j] += a1 * bv;
      }
    }
  }
  if (i < m) {
    const r0 = i * n;
    const aRow = i * k;
    for (let l = 0; l < k; l++) {
      const av = a[aRow + l];
      const bRow = l * n;
      for (let j = 0; j < n; j++) {
        c[r0 + j] += av * b[bRow + j];
      }
    }
  }
}

/** c[m, n] += a[m, p] * b[n, p]^T, i.e. c[i][j] += dot(a row i, b row j). */
export function gemmABtAcc(
  m: number,
  p: number,
  n: number,
  a: Float64Array,
  b: Float64Array,
  c: Float64Array,
): void {
  const p4 = p & ~3;
  for (let i = 0; i < m; i++) {
    const aRow = i * p;
    const cRow = i * n;
    for (let j = 0; j < n; j++) {
      const bRow = j * p;
      let s0 = 0;
      let s1 = 0;
      let s2 = 0;
      let s3 = 0;
      let l = 0;
      for (; l < p4; l += 4) {
        s0 += a[aRow + l] * b[bRow + l];
        s1 += a[aRow + l + 1] * b[bRow + l + 1];
        s2 += a[aRow + l + 2] * b[bRow + l + 2];
        s3 += a[aRow + l + 3] * b[bRow + l + 3];
      }
      let s = s0 + s1 + s2 + s3;
      for (; l < p; l++) {
        s += a[aRow + l] * b[bRow + l];
      }
      c[cRow + j] += s;
    }
  }
}

/** out[n, m] = a[m, n]^T. */
export function transpose(
  m: number,
  n: number,
  a: Float64Array,
  out: Float64Array,
): void {
  for (let i = 0; i < m; i++) {
    const row = i * n;
    for (let j = 0; j < n; j++) {
      out[j * m + i] = a[row + j];
    }
  }
}
