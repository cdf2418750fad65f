/**
 * Training loop: simulate the channel inside every step, optimize the
 * encoder/decoders and transmit scales jointly, freeze the power-block
 * running statistics, and export everything in the shared weight format.
 */

import { AdamW, DEFAULT_OPTIM, OptimConfig } from "./optim.js";
import { drawBatch } from "./channel.js";
import { Codec, ModelConfig, runProtocol, encForward, feForward, pamPoints } from "./model.js";
import { affineForward } from "./nn.js";
import { normals } from "./philox.js";

export interface TrainConfig {
  batch: number;
  epochs: number; // optimizer steps; each sees a fresh simulated batch
  seed: number;
  lr: number;
  weightDecay: number;
  clipNorm: number;
  statsMomentum: number;
  valTrials: number;
}

export const DESK_DEFAULTS: Omit<TrainConfig, "seed"> = {
  batch: 4096,
  epochs: 3000,
  lr: 0.002,
  weightDecay: 0.01,
  clipNorm: 0.5,
  statsMomentum: 0.99,
  valTrials: 200_000,
};

const VAL_BASE = 2 ** 40; // validation sample ids never collide with training

export interface TrainLog {
  config: Record<string, unknown>;
  loss: { step: number; l1: number; l2: number; total: number }[];
  gradNorm: number[];
  valBler: [number, number];
  valBlerJoint: number;
  canonicalized: boolean;
  slopes: { user1: number; user2: number; r2u1: number; r2u2: number };
}

export function validateBler(
  codec: Codec, seed: number, trials: number, batch = 8192, base = VAL_BASE,
): [number, number] {
  let errors: [number, number] = [0, 0];
  for (let done = 0; done < trials; done += batch) {
    const b = Math.min(batch, trials - done);
    const data = drawBatch(codec.cfg, seed, base + done, b);
    const out = runProtocol(codec, data, "eval", false);
    errors = [errors[0] + out.errors[0], errors[1] + out.errors[1]];
  }
  return [errors[0] / trials, errors[1] / trials];
}

/** Encoder response to one swept init-round feedback coordinate, all other
 * randomness zeroed and both message indices fixed to 0. */
export function interpretSweep(
  codec: Codec, varyUser: 1 | 2, grid: Float64Array, roundIndex = 3,
): { grid: number[]; x: number[]; slope: number; r2: number } {
  const { n } = codec.cfg;
  const blk = n - 1;
  const B = grid.length;
  const { beta } = codec.betas();
  const pts: [Float64Array, Float64Array] = [
    pamPoints(codec.cfg.k[0]), pamPoints(codec.cfg.k[1]),
  ];
  const x = new Float64Array(B * n);
  const yt: [Float64Array, Float64Array] = [new Float64Array(B * n), new Float64Array(B * n)];
  for (let i = 0; i < 2; i++) {
    for (let b = 0; b < B; b++) {
      const v = beta[i] * pts[i][0];
      x[b * n + i] = v;
      yt[0][b * n + i] = v;
      yt[1][b * n + i] = v;
    }
  }
  for (let b = 0; b < B; b++) yt[varyUser - 1][b * n + (varyUser - 1)] = grid[b];
  let out = new Float64Array(B);
  for (let round = 3; round <= roundIndex; round++) {
    const i = round - 1;
    const q = new Float64Array(B * codec.encIn);
    for (let b = 0; b < B; b++) {
      const qo = b * codec.encIn;
      const ro = b * n;
      for (let t = 0; t < i; t++) {
        q[qo + t] = x[ro + t];
        q[qo + blk + t] = yt[0][ro + t];
        q[qo + 2 * blk + t] = yt[1][ro + t];
      }
    }
    const enc = encForward(codec, q, B);
    const mu = codec.runMean[round - 3];
    const inv = 1 / Math.sqrt(codec.runVar[round - 3] + 1e-6);
    for (let b = 0; b < B; b++) {
      const xb = beta[i] * (enc.s[b] - mu) * inv;
      x[b * n + i] = xb;
      yt[0][b * n + i] = xb;
      yt[1][b * n + i] = xb;
      if (round === roundIndex) out[b] = xb;
    }
  }
  // least-squares line fit
  let sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (let b = 0; b < B; b++) {
    sx += grid[b]; sy += out[b];
    sxx += grid[b] * grid[b]; sxy += grid[b] * out[b]; syy += out[b] * out[b];
  }
  const cov = sxy - (sx * sy) / B;
  const vx = sxx - (sx * sx) / B;
  const vy = syy - (sy * sy) / B;
  const slope = cov / vx;
  const r2 = vy > 0 ? (cov * cov) / (vx * vy) : 1.0;
  return { grid: [...grid], x: [...out], slope, r2 };
}

/**
 * Exact weight-space sign flip: negates the encoder scalar head (flipping
 * every learned transmit symbol), the frozen power-block means, and the
 * input columns through which rounds >= 3 reach the encoder and decoders.
 * The resulting codec is distribution-equivalent, with both interpretation
 * slopes negated.
 */
export function flipEncoderSign(codec: Codec) {
  const { n } = codec.cfg;
  const blk = n - 1;
  const negate = (name: string) => {
    const v = codec.ps.view(name);
    for (let i = 0; i < v.length; i++) v[i] = -v[i];
  };
  negate("mlp_enc.w2");
  negate("mlp_enc.b2");
  for (let i = 0; i < codec.runMean.length; i++) codec.runMean[i] = -codec.runMean[i];
  const negateColumn = (name: string, col: number, inDim: number) => {
    const v = codec.ps.view(name);
    const rows = codec.ps.spec(name).shape[0];
    for (let r = 0; r < rows; r++) v[r * inDim + col] = -v[r * inDim + col];
  };
  for (let round = 3; round <= n; round++) {
    const i = round - 1;
    negateColumn("fe_dec1.w1", i, n);
    negateColumn("fe_dec2.w1", i, n);
    if (i < blk) {
      // history columns for the flipped symbols and their feedback copies
      negateColumn("fe_enc.w1", i, codec.encIn);
      negateColumn("fe_enc.w1", blk + i, codec.encIn);
      negateColumn("fe_enc.w1", 2 * blk + i, codec.encIn);
    }
  }
}

export function train(cfg: ModelConfig, tc: TrainConfig, onStep?: (s: number, out: { total: number }) => void): { codec: Codec; log: TrainLog } {
  const codec = new Codec(cfg);
  codec.initWeights(tc.seed);
  const optim: OptimConfig = {
    ...DEFAULT_OPTIM,
    lr: tc.lr,
    weightDecay: tc.weightDecay,
    clipNorm: tc.clipNorm,
    steps: tc.epochs,
  };
  const opt = new AdamW(codec.ps, optim);
  const log: TrainLog = {
    config: { ...cfg, ...tc, optimizer: "adamw", schedule: "cosine" },
    loss: [],
    gradNorm: [],
    valBler: [0, 0],
    valBlerJoint: 0,
    canonicalized: false,
    slopes: { user1: 0, user2: 0, r2u1: 0, r2u2: 0 },
  };
  const m = tc.statsMomentum;
  for (let step = 0; step < tc.epochs; step++) {
    const batch = drawBatch(cfg, tc.seed, step * tc.batch, tc.batch);
    codec.ps.zeroGrad();
    const out = runProtocol(codec, batch, "train", true);
    if (!Number.isFinite(out.total)) {
      throw new Error(
        `training diverged at step ${step}: loss=${out.total} ` +
        `(l1=${out.l1}, l2=${out.l2})`,
      );
    }
    const norm = opt.clip();
    opt.step();
    for (let j = 0; j < out.batchStats.length; j++) {
      codec.runMean[j] = m * codec.runMean[j] + (1 - m) * out.batchStats[j].mean;
      codec.runVar[j] = m * codec.runVar[j] + (1 - m) * out.batchStats[j].variance;
    }
    if (step % 10 === 0 || step === tc.epochs - 1) {
      log.loss.push({ step, l1: out.l1, l2: out.l2, total: out.total });
      log.gradNorm.push(norm);
    }
    onStep?.(step, out);
  }
  return { codec, log };
}

export function measureSlopes(codec: Codec) {
  const sigmaF = Math.sqrt(
    codec.cfg.p / Math.pow(10, codec.cfg.snrFDb / 10),
  );
  const { beta } = codec.betas();
  const res: { user1: number; user2: number; r2u1: number; r2u2: number } = {
    user1: 0, user2: 0, r2u1: 0, r2u2: 0,
  };
  for (const u of [1, 2] as const) {
    const sigma = Math.sqrt(beta[u - 1] * beta[u - 1] + sigmaF * sigmaF);
    const grid = new Float64Array(61);
    for (let i = 0; i < 61; i++) grid[i] = -3 * sigma + (6 * sigma * i) / 60;
    const sweep = interpretSweep(codec, u, grid);
    if (u === 1) {
      res.user1 = sweep.slope;
      res.r2u1 = sweep.r2;
    } else {
      res.user2 = sweep.slope;
      res.r2u2 = sweep.r2;
    }
  }
  return res;
}

/** Cross-boundary forward cases on random inputs (for the runtime to check
 * against within 1e-5). */
export function emitGoldens(codec: Codec, seed: number, count = 50) {
  const { n } = codec.cfg;
  const cases: {
    encoder: { round: number; x_hist: number[]; fb1: number[]; fb2: number[]; x: number }[];
    decoder: { user: number; y: number[]; logits: number[] }[];
  } = { encoder: [], decoder: [] };
  const blk = n - 1;
  const { beta } = codec.betas();
  for (let t = 0; t < count; t++) {
    const round = 3 + (t % (n - 2));
    const i = round - 1;
    const draw = normals(seed, 20, t, 3 * i);
    const xHist = [...draw.subarray(0, i)].map(Math.fround);
    const fb1 = [...draw.subarray(i, 2 * i)].map(Math.fround);
    const fb2 = [...draw.subarray(2 * i, 3 * i)].map(Math.fround);
    const q = new Float64Array(codec.encIn);
    for (let tt = 0; tt < i; tt++) {
      q[tt] = xHist[tt];
      q[blk + tt] = fb1[tt];
      q[2 * blk + tt] = fb2[tt];
    }
    const enc = encForward(codec, q, 1);
    const mu = codec.runMean[round - 3];
    const inv = 1 / Math.sqrt(codec.runVar[round - 3] + 1e-6);
    const x = beta[i] * (enc.s[0] - mu) * inv;
    cases.encoder.push({ round, x_hist: xHist, fb1, fb2, x });
  }
  for (let u = 0 as 0 | 1; u < 2; u++) {
    for (let t = 0; t < count / 2; t++) {
      const y = [...normals(seed, 21 + u, t, n)].map(Math.fround);
      const fe = feForward(codec, `fe_dec${u + 1}`, Float64Array.from(y), 1, n);
      const logits = affineForward(
        fe.out, codec.ps.view(`mlp_dec${u + 1}.w`), codec.ps.view(`mlp_dec${u + 1}.b`),
        1, codec.cfg.dH, codec.c[u],
      );
      cases.decoder.push({ user: u, y, logits: [...logits] });
    }
  }
  return cases;
}
