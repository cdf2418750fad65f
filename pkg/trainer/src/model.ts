/**
 * The learned broadcast-feedback codec: a shared encoder (feature extractor
 * plus two-layer MLP head ending in a scalar) and one single-layer decoder
 * head per user on top of its own feature extractor. The transmit scalar is
 * batch-standardized per round and scaled by the learned per-round betas,
 * which are reparameterized so the average-power constraint holds exactly.
 */

import {
  ParamSet, affineForward, affineBackward, tanhForward, tanhBackward,
  lnForward, lnBackward, bnForward, bnBackward, softmaxRows, nllLoss,
  nllBackward, LnCache, BnCache,
} from "./nn.js";
import { normals, ROLE_WEIGHT_INIT } from "./philox.js";

export interface ModelConfig {
  dH: number;
  n: number;
  k: [number, number];
  p: number;
  snrFDb: number;
  snrFbDb: number | null; // null = noiseless feedback
}

export function snrDbToVariance(snrDb: number, p: number): number {
  return p / Math.pow(10, snrDb / 10);
}

export function pamPoints(k: number): Float64Array {
  const eta = Math.sqrt(3 / (Math.pow(4, k) - 1));
  const m = 1 << k;
  const pts = new Float64Array(m);
  for (let i = 0; i < m; i++) pts[i] = (2 * i - (m - 1)) * eta;
  return pts;
}

export class Codec {
  ps = new ParamSet();
  runMean: Float64Array;
  runVar: Float64Array;
  readonly encIn: number;
  readonly c: [number, number];

  constructor(public cfg: ModelConfig) {
    const { dH, n, k } = cfg;
    this.encIn = 3 * (n - 1);
    this.c = [1 << k[0], 1 << k[1]];
    const fe = (prefix: string, inDim: number) => {
      this.ps.register(`${prefix}.w1`, [dH, inDim]);
      this.ps.register(`${prefix}.b1`, [dH]);
      this.ps.register(`${prefix}.w2`, [dH, dH]);
      this.ps.register(`${prefix}.b2`, [dH]);
      this.ps.register(`${prefix}.ln_g`, [dH]);
      this.ps.register(`${prefix}.ln_b`, [dH]);
    };
    fe("fe_enc", this.encIn);
    this.ps.register("mlp_enc.w1", [dH, dH]);
    this.ps.register("mlp_enc.b1", [dH]);
    this.ps.register("mlp_enc.w2", [1, dH]);
    this.ps.register("mlp_enc.b2", [1]);
    fe("fe_dec1", n);
    this.ps.register("mlp_dec1.w", [this.c[0], dH]);
    this.ps.register("mlp_dec1.b", [this.c[0]]);
    fe("fe_dec2", n);
    this.ps.register("mlp_dec2.w", [this.c[1], dH]);
    this.ps.register("mlp_dec2.b", [this.c[1]]);
    this.ps.register("beta_raw", [n]);
    this.ps.finalize();
    this.runMean = new Float64Array(n - 2);
    this.runVar = new Float64Array(n - 2).fill(1);
  }

  initWeights(seed: number) {
    let cursor = 0;
    const draw = (count: number, scale: number) => {
      const v = normals(seed, ROLE_WEIGHT_INIT, cursor++, count);
      for (let i = 0; i < count; i++) v[i] *= scale;
      return v;
    };
    for (const spec of this.ps.specs.values()) {
      const view = this.ps.view(spec.name);
      if (spec.name === "beta_raw") {
        view.fill(1); // projected to sqrt(P) per round
      } else if (spec.name.endsWith(".ln_g")) {
        view.fill(1);
      } else if (spec.name.endsWith(".ln_b") || spec.name.includes(".b")) {
        view.fill(0);
      } else {
        const fanIn = spec.shape[1];
        view.set(draw(spec.size, 1 / Math.sqrt(fanIn)));
      }
    }
  }

  /** beta_i = raw_i * sqrt(n P / sum raw^2): the constraint is exact. */
  betas(): { beta: Float64Array; raw: Float64Array; scale: number; sumSq: number } {
    const raw = this.ps.view("beta_raw");
    let sumSq = 0;
    for (let i = 0; i < raw.length; i++) sumSq += raw[i] * raw[i];
    const scale = Math.sqrt((this.cfg.n * this.cfg.p) / sumSq);
    const beta = new Float64Array(raw.length);
    for (let i = 0; i < raw.length; i++) beta[i] = raw[i] * scale;
    return { beta, raw, scale, sumSq };
  }

  betaBackward(dBeta: Float64Array) {
    const { raw, scale, sumSq } = this.betas();
    const dRaw = this.ps.gview("beta_raw");
    let dot = 0;
    for (let i = 0; i < raw.length; i++) dot += dBeta[i] * raw[i];
    for (let j = 0; j < raw.length; j++) {
      dRaw[j] += scale * dBeta[j] - (raw[j] * scale * dot) / sumSq;
    }
  }
}

export interface FeCache {
  x: Float64Array;
  h1: Float64Array;
  ln: LnCache;
  out: Float64Array;
  inDim: number;
  B: number;
}

export function feForward(c: Codec, prefix: string, x: Float64Array, B: number, inDim: number): FeCache {
  const dH = c.cfg.dH;
  const pre1 = affineForward(x, c.ps.view(`${prefix}.w1`), c.ps.view(`${prefix}.b1`), B, inDim, dH);
  const h1 = tanhForward(pre1);
  const h2 = affineForward(h1, c.ps.view(`${prefix}.w2`), c.ps.view(`${prefix}.b2`), B, dH, dH);
  for (let i = 0; i < h2.length; i++) h2[i] += h1[i]; // residual combination
  const { out, cache } = lnForward(h2, c.ps.view(`${prefix}.ln_g`), c.ps.view(`${prefix}.ln_b`), B, dH);
  return { x, h1, ln: cache, out, inDim, B };
}

export function feBackward(c: Codec, prefix: string, cache: FeCache, dOut: Float64Array): Float64Array {
  const dH = c.cfg.dH;
  const { B, inDim } = cache;
  const dR = lnBackward(
    dOut, c.ps.view(`${prefix}.ln_g`), cache.ln,
    c.ps.gview(`${prefix}.ln_g`), c.ps.gview(`${prefix}.ln_b`), B, dH,
  );
  // r = affine2(h1) + h1
  const dH1FromAffine = affineBackward(
    cache.h1, c.ps.view(`${prefix}.w2`), dR,
    c.ps.gview(`${prefix}.w2`), c.ps.gview(`${prefix}.b2`), B, dH, dH,
  )!;
  const dH1 = new Float64Array(B * dH);
  for (let i = 0; i < dH1.length; i++) dH1[i] = dH1FromAffine[i] + dR[i];
  const dPre1 = tanhBackward(cache.h1, dH1);
  return affineBackward(
    cache.x, c.ps.view(`${prefix}.w1`), dPre1,
    c.ps.gview(`${prefix}.w1`), c.ps.gview(`${prefix}.b1`), B, inDim, dH,
  )!;
}

export interface EncCache {
  fe: FeCache;
  m1: Float64Array;
  s: Float64Array;
}

export function encForward(c: Codec, q: Float64Array, B: number): EncCache {
  const dH = c.cfg.dH;
  const fe = feForward(c, "fe_enc", q, B, c.encIn);
  const pre = affineForward(fe.out, c.ps.view("mlp_enc.w1"), c.ps.view("mlp_enc.b1"), B, dH, dH);
  const m1 = tanhForward(pre);
  const s = affineForward(m1, c.ps.view("mlp_enc.w2"), c.ps.view("mlp_enc.b2"), B, dH, 1);
  return { fe, m1, s };
}

export function encBackward(c: Codec, cache: EncCache, dS: Float64Array): Float64Array {
  const dH = c.cfg.dH;
  const B = cache.fe.B;
  const dM1 = affineBackward(
    cache.m1, c.ps.view("mlp_enc.w2"), dS,
    c.ps.gview("mlp_enc.w2"), c.ps.gview("mlp_enc.b2"), B, dH, 1,
  )!;
  const dPre = tanhBackward(cache.m1, dM1);
  const dF = affineBackward(
    cache.fe.out, c.ps.view("mlp_enc.w1"), dPre,
    c.ps.gview("mlp_enc.w1"), c.ps.gview("mlp_enc.b1"), B, dH, dH,
  )!;
  return feBackward(c, "fe_enc", cache.fe, dF);
}

export interface Batch {
  B: number;
  labels: [Int32Array, Int32Array];
  theta: [Float64Array, Float64Array];
  zFwd: [Float64Array, Float64Array]; // (B*n) row-major per user
  zFb: [Float64Array, Float64Array] | null;
}

export interface StepOutcome {
  l1: number;
  l2: number;
  balance: number;
  total: number;
  batchStats: { mean: number; variance: number }[]; // per refinement round
  errors: [number, number];
}

/**
 * Full protocol forward (and optionally backward into ps.grad).
 * mode "train" standardizes the encoder scalar with batch statistics;
 * "eval" uses the frozen running statistics.
 */
export function runProtocol(
  c: Codec, batch: Batch, mode: "train" | "eval", withGrad: boolean,
): StepOutcome {
  const { n, dH } = c.cfg;
  const { B } = batch;
  const blk = n - 1;
  const { beta } = c.betas();
  // symbol and observation buffers, row-major (B, n)
  const x = new Float64Array(B * n);
  const y: [Float64Array, Float64Array] = [new Float64Array(B * n), new Float64Array(B * n)];
  const yt: [Float64Array, Float64Array] = [new Float64Array(B * n), new Float64Array(B * n)];
  const fill = (i: number) => {
    for (let u = 0 as 0 | 1; u < 2; u++) {
      const zf = batch.zFwd[u];
      const zb = batch.zFb ? batch.zFb[u] : null;
      const yu = y[u];
      const ytu = yt[u];
      for (let b = 0; b < B; b++) {
        const idx = b * n + i;
        yu[idx] = x[idx] + zf[idx];
        ytu[idx] = yu[idx] + (zb ? zb[idx] : 0);
      }
    }
  };
  for (let i = 0; i < 2; i++) {
    const th = batch.theta[i as 0 | 1];
    for (let b = 0; b < B; b++) x[b * n + i] = beta[i] * th[b];
    fill(i);
  }
  const encCaches: EncCache[] = [];
  const bnCaches: (BnCache | null)[] = [];
  const xhats: Float64Array[] = [];
  const qs: Float64Array[] = [];
  const batchStats: { mean: number; variance: number }[] = [];
  for (let round = 3; round <= n; round++) {
    const i = round - 1;
    const q = new Float64Array(B * c.encIn);
    for (let b = 0; b < B; b++) {
      const qo = b * c.encIn;
      const ro = b * n;
      for (let t = 0; t < i; t++) {
        q[qo + t] = x[ro + t];
        q[qo + blk + t] = yt[0][ro + t];
        q[qo + 2 * blk + t] = yt[1][ro + t];
      }
    }
    const enc = encForward(c, q, B);
    let xhat: Float64Array;
    let bn: BnCache | null = null;
    if (mode === "train") {
      bn = bnForward(enc.s);
      xhat = bn.xhat;
      batchStats.push({ mean: bn.mean, variance: bn.variance });
    } else {
      const mu = c.runMean[round - 3];
      const inv = 1 / Math.sqrt(c.runVar[round - 3] + 1e-6);
      xhat = new Float64Array(B);
      for (let b = 0; b < B; b++) xhat[b] = (enc.s[b] - mu) * inv;
      batchStats.push({ mean: mu, variance: c.runVar[round - 3] });
    }
    for (let b = 0; b < B; b++) x[b * n + i] = beta[i] * xhat[b];
    fill(i);
    encCaches.push(enc);
    bnCaches.push(bn);
    xhats.push(xhat);
    qs.push(q);
  }
  // decoders
  const feDec: FeCache[] = [];
  const probs: Float64Array[] = [];
  const losses: number[] = [];
  const errors: [number, number] = [0, 0];
  for (let u = 0 as 0 | 1; u < 2; u++) {
    const fe = feForward(c, `fe_dec${u + 1}`, y[u], B, n);
    const logits = affineForward(
      fe.out, c.ps.view(`mlp_dec${u + 1}.w`), c.ps.view(`mlp_dec${u + 1}.b`),
      B, dH, c.c[u],
    );
    const p = softmaxRows(logits, B, c.c[u]);
    losses.push(nllLoss(p, batch.labels[u], B, c.c[u]));
    feDec.push(fe);
    probs.push(p);
    for (let b = 0; b < B; b++) {
      let best = 0;
      const o = b * c.c[u];
      for (let j = 1; j < c.c[u]; j++) if (p[o + j] > p[o + best]) best = j;
      if (best !== batch.labels[u][b]) errors[u]++;
    }
  }
  const [l1, l2] = losses;
  const balance = (l1 - l2) * (l1 - l2);
  const outcome: StepOutcome = {
    l1, l2, balance, total: l1 + l2 + balance, batchStats, errors,
  };
  if (!withGrad) return outcome;

  const coef: [number, number] = [1 + 2 * (l1 - l2), 1 - 2 * (l1 - l2)];
  const dY: [Float64Array, Float64Array] = [new Float64Array(B * n), new Float64Array(B * n)];
  for (let u = 0 as 0 | 1; u < 2; u++) {
    const dLogits = nllBackward(probs[u], batch.labels[u], coef[u], B, c.c[u]);
    const dF = affineBackward(
      feDec[u].out, c.ps.view(`mlp_dec${u + 1}.w`), dLogits,
      c.ps.gview(`mlp_dec${u + 1}.w`), c.ps.gview(`mlp_dec${u + 1}.b`),
      B, dH, c.c[u],
    )!;
    dY[u] = feBackward(c, `fe_dec${u + 1}`, feDec[u], dF);
  }
  // dX accumulates: received symbols are X plus noise on every path
  const dX = new Float64Array(B * n);
  for (let b = 0; b < B; b++) {
    const o = b * n;
    for (let i = 0; i < n; i++) dX[o + i] = dY[0][o + i] + dY[1][o + i];
  }
  const dBeta = new Float64Array(n);
  for (let round = n; round >= 3; round--) {
    const i = round - 1;
    const j = round - 3;
    const xhat = xhats[j];
    const dXhat = new Float64Array(B);
    for (let b = 0; b < B; b++) {
      const g = dX[b * n + i];
      dBeta[i] += g * xhat[b];
      dXhat[b] = g * beta[i];
    }
    const bn = bnCaches[j];
    const dS = bn ? bnBackward(dXhat, bn) : (() => {
      const inv = 1 / Math.sqrt(c.runVar[j] + 1e-6);
      const out = new Float64Array(B);
      for (let b = 0; b < B; b++) out[b] = dXhat[b] * inv;
      return out;
    })();
    const dQ = encBackward(c, encCaches[j], dS);
    for (let b = 0; b < B; b++) {
      const qo = b * c.encIn;
      const ro = b * n;
      for (let t = 0; t < i; t++) {
        dX[ro + t] += dQ[qo + t] + dQ[qo + blk + t] + dQ[qo + 2 * blk + t];
      }
    }
  }
  for (let b = 0; b < B; b++) {
    dBeta[0] += dX[b * n] * batch.theta[0][b];
    dBeta[1] += dX[b * n + 1] * batch.theta[1][b];
  }
  c.betaBackward(dBeta);
  return outcome;
}
