/**
 * AdamW with global-norm gradient clipping and cosine learning-rate decay.
 * Weight decay is decoupled and skipped for layer-norm gains/biases, plain
 * biases, and the transmit-scale parameters.
 */

import { ParamSet } from "./nn.js";

export interface OptimConfig {
  lr: number;
  beta1: number;
  beta2: number;
  eps: number;
  weightDecay: number;
  clipNorm: number;
  steps: number; // total steps for the cosine schedule
  lrFloor: number;
}

export const DEFAULT_OPTIM: OptimConfig = {
  lr: 0.002,
  beta1: 0.9,
  beta2: 0.999,
  eps: 1e-8,
  weightDecay: 0.01,
  clipNorm: 0.5,
  steps: 1,
  lrFloor: 5e-5,
};

export class AdamW {
  m: Float64Array;
  v: Float64Array;
  t = 0;
  private decayMask: Uint8Array;

  constructor(private ps: ParamSet, public cfg: OptimConfig) {
    this.m = new Float64Array(ps.length);
    this.v = new Float64Array(ps.length);
    this.decayMask = new Uint8Array(ps.length);
    for (const spec of ps.specs.values()) {
      const isMatrix = spec.shape.length === 2;
      const decayed = isMatrix && spec.name !== "beta_raw" ? 1 : 0;
      this.decayMask.fill(decayed, spec.offset, spec.offset + spec.size);
    }
  }

  lrAt(step: number): number {
    const { lr, steps, lrFloor } = this.cfg;
    const frac = Math.min(step / Math.max(steps, 1), 1);
    return lrFloor + (lr - lrFloor) * 0.5 * (1 + Math.cos(Math.PI * frac));
  }

  /** Clips grad in place; returns the pre-clip global norm. */
  clip(): number {
    const g = this.ps.grad;
    let sq = 0;
    for (let i = 0; i < g.length; i++) sq += g[i] * g[i];
    const norm = Math.sqrt(sq);
    if (norm > this.cfg.clipNorm && norm > 0) {
      const s = this.cfg.clipNorm / norm;
      for (let i = 0; i < g.length; i++) g[i] *= s;
    }
    return norm;
  }

  step() {
    const lr = this.lrAt(this.t);
    this.t += 1;
    const { beta1, beta2, eps, weightDecay } = this.cfg;
    const bc1 = 1 - Math.pow(beta1, this.t);
    const bc2 = 1 - Math.pow(beta2, this.t);
    const p = this.ps.data;
    const g = this.ps.grad;
    for (let i = 0; i < p.length; i++) {
      this.m[i] = beta1 * this.m[i] + (1 - beta1) * g[i];
      this.v[i] = beta2 * this.v[i] + (1 - beta2) * g[i] * g[i];
      const mHat = this.m[i] / bc1;
      const vHat = this.v[i] / bc2;
      p[i] -= lr * (mHat / (Math.sqrt(vHat) + eps));
      if (this.decayMask[i]) p[i] -= lr * weightDecay * p[i];
    }
  }
}
