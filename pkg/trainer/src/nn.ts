/**
 * Flat parameter store and the layer primitives (affine, tanh, layer norm,
 * batch standardization, softmax/NLL) with hand-written backward passes.
 * Everything runs in float64; weights are rounded to float32 at export.
 */

export const LN_EPS = 1e-6;
export const PS_EPS = 1e-6;

export interface TensorSpec {
  name: string;
  shape: number[];
  offset: number;
  size: number;
}

export class ParamSet {
  specs = new Map<string, TensorSpec>();
  data!: Float64Array;
  grad!: Float64Array;
  private cursor = 0;
  private building = true;

  register(name: string, shape: number[]) {
    if (!this.building) throw new Error("param set already finalized");
    const size = shape.reduce((a, b) => a * b, 1);
    this.specs.set(name, { name, shape, offset: this.cursor, size });
    this.cursor += size;
  }

  finalize() {
    this.data = new Float64Array(this.cursor);
    this.grad = new Float64Array(this.cursor);
    this.building = false;
  }

  spec(name: string): TensorSpec {
    const s = this.specs.get(name);
    if (!s) throw new Error(`unknown tensor ${name}`);
    return s;
  }

  view(name: string): Float64Array {
    const s = this.spec(name);
    return this.data.subarray(s.offset, s.offset + s.size);
  }

  gview(name: string): Float64Array {
    const s = this.spec(name);
    return this.grad.subarray(s.offset, s.offset + s.size);
  }

  zeroGrad() {
    this.grad.fill(0);
  }

  get length() {
    return this.data.length;
  }
}

/** y[B,out] = x[B,in] @ W[out,in]^T + b[out] */
export function affineForward(
  x: Float64Array, w: Float64Array, b: Float64Array,
  B: number, inD: number, outD: number,
): Float64Array {
  const y = new Float64Array(B * outD);
  for (let r = 0; r < B; r++) {
    const xr = r * inD;
    const yr = r * outD;
    for (let o = 0; o < outD; o++) {
      const wo = o * inD;
      let acc = b[o];
      for (let i = 0; i < inD; i++) acc += x[xr + i] * w[wo + i];
      y[yr + o] = acc;
    }
  }
  return y;
}

/** Accumulates dW, dB; returns dx unless skipDx. */
export function affineBackward(
  x: Float64Array, w: Float64Array, dy: Float64Array,
  dW: Float64Array, dB: Float64Array,
  B: number, inD: number, outD: number, skipDx = false,
): Float64Array | null {
  for (let r = 0; r < B; r++) {
    const xr = r * inD;
    const yr = r * outD;
    for (let o = 0; o < outD; o++) {
      const g = dy[yr + o];
      if (g === 0) continue;
      dB[o] += g;
      const wo = o * inD;
      for (let i = 0; i < inD; i++) dW[wo + i] += g * x[xr + i];
    }
  }
  if (skipDx) return null;
  const dx = new Float64Array(B * inD);
  for (let r = 0; r < B; r++) {
    const xr = r * inD;
    const yr = r * outD;
    for (let o = 0; o < outD; o++) {
      const g = dy[yr + o];
      if (g === 0) continue;
      const wo = o * inD;
      for (let i = 0; i < inD; i++) dx[xr + i] += g * w[wo + i];
    }
  }
  return dx;
}

export function tanhForward(x: Float64Array): Float64Array {
  const y = new Float64Array(x.length);
  for (let i = 0; i < x.length; i++) y[i] = Math.tanh(x[i]);
  return y;
}

export function tanhBackward(y: Float64Array, dy: Float64Array): Float64Array {
  const dx = new Float64Array(y.length);
  for (let i = 0; i < y.length; i++) dx[i] = dy[i] * (1 - y[i] * y[i]);
  return dx;
}

export interface LnCache {
  z: Float64Array; // normalized pre-gain activations
  inv: Float64Array; // 1/sqrt(var+eps) per row
}

/** Row-wise layer norm with learned gain/bias. */
export function lnForward(
  r: Float64Array, g: Float64Array, b: Float64Array, B: number, d: number,
): { out: Float64Array; cache: LnCache } {
  const out = new Float64Array(B * d);
  const z = new Float64Array(B * d);
  const inv = new Float64Array(B);
  for (let row = 0; row < B; row++) {
    const o = row * d;
    let mean = 0;
    for (let i = 0; i < d; i++) mean += r[o + i];
    mean /= d;
    let v = 0;
    for (let i = 0; i < d; i++) {
      const c = r[o + i] - mean;
      v += c * c;
    }
    v /= d;
    const iv = 1 / Math.sqrt(v + LN_EPS);
    inv[row] = iv;
    for (let i = 0; i < d; i++) {
      const zz = (r[o + i] - mean) * iv;
      z[o + i] = zz;
      out[o + i] = g[i] * zz + b[i];
    }
  }
  return { out, cache: { z, inv } };
}

export function lnBackward(
  dOut: Float64Array, g: Float64Array, cache: LnCache,
  dG: Float64Array, dB: Float64Array, B: number, d: number,
): Float64Array {
  const { z, inv } = cache;
  const dr = new Float64Array(B * d);
  for (let row = 0; row < B; row++) {
    const o = row * d;
    let sumDz = 0;
    let sumDzZ = 0;
    for (let i = 0; i < d; i++) {
      const du = dOut[o + i];
      dG[i] += du * z[o + i];
      dB[i] += du;
      const dz = du * g[i];
      sumDz += dz;
      sumDzZ += dz * z[o + i];
    }
    const mDz = sumDz / d;
    const mDzZ = sumDzZ / d;
    for (let i = 0; i < d; i++) {
      const dz = dOut[o + i] * g[i];
      dr[o + i] = inv[row] * (dz - mDz - z[o + i] * mDzZ);
    }
  }
  return dr;
}

export interface BnCache {
  xhat: Float64Array;
  inv: number;
  mean: number;
  variance: number;
}

/** Batch standardization of a scalar channel (the power-constraint block). */
export function bnForward(s: Float64Array): BnCache {
  const B = s.length;
  let mean = 0;
  for (let i = 0; i < B; i++) mean += s[i];
  mean /= B;
  let v = 0;
  for (let i = 0; i < B; i++) {
    const c = s[i] - mean;
    v += c * c;
  }
  v /= B;
  const inv = 1 / Math.sqrt(v + PS_EPS);
  const xhat = new Float64Array(B);
  for (let i = 0; i < B; i++) xhat[i] = (s[i] - mean) * inv;
  return { xhat, inv, mean, variance: v };
}

export function bnBackward(dXhat: Float64Array, cache: BnCache): Float64Array {
  const B = dXhat.length;
  let mD = 0;
  let mDX = 0;
  for (let i = 0; i < B; i++) {
    mD += dXhat[i];
    mDX += dXhat[i] * cache.xhat[i];
  }
  mD /= B;
  mDX /= B;
  const ds = new Float64Array(B);
  for (let i = 0; i < B; i++) {
    ds[i] = cache.inv * (dXhat[i] - mD - cache.xhat[i] * mDX);
  }
  return ds;
}

/** Row-wise softmax probabilities (float64 throughout). */
export function softmaxRows(logits: Float64Array, B: number, c: number): Float64Array {
  const p = new Float64Array(B * c);
  for (let r = 0; r < B; r++) {
    const o = r * c;
    let mx = -Infinity;
    for (let i = 0; i < c; i++) mx = Math.max(mx, logits[o + i]);
    let sum = 0;
    for (let i = 0; i < c; i++) {
      const e = Math.exp(logits[o + i] - mx);
      p[o + i] = e;
      sum += e;
    }
    for (let i = 0; i < c; i++) p[o + i] /= sum;
  }
  return p;
}

export const NLL_CLAMP = 1e-12;

/** Mean negative log-likelihood of the labeled class. */
export function nllLoss(p: Float64Array, labels: Int32Array, B: number, c: number): number {
  let acc = 0;
  for (let r = 0; r < B; r++) {
    acc -= Math.log(Math.max(p[r * c + labels[r]], NLL_CLAMP));
  }
  return acc / B;
}

/** d(loss coef * nll)/dlogits for softmax+NLL: coef*(p - onehot)/B. */
export function nllBackward(
  p: Float64Array, labels: Int32Array, coef: number, B: number, c: number,
): Float64Array {
  const d = new Float64Array(B * c);
  const scale = coef / B;
  for (let r = 0; r < B; r++) {
    const o = r * c;
    for (let i = 0; i < c; i++) d[o + i] = scale * p[o + i];
    d[o + labels[r]] -= scale;
  }
  return d;
}
