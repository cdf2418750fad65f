/**
 * Batch channel simulation for training: fresh messages and Gaussian noise
 * per batch, addressed by (seed, role, global sample id) so runs are
 * reproducible for a fixed seed.
 */

import {
  messageIndex, normals,
  ROLE_MESSAGE_U1, ROLE_MESSAGE_U2,
  ROLE_NOISE_FWD_U1, ROLE_NOISE_FWD_U2,
  ROLE_NOISE_FB_U1, ROLE_NOISE_FB_U2,
} from "./philox.js";
import { Batch, ModelConfig, pamPoints, snrDbToVariance } from "./model.js";

const MSG_ROLES = [ROLE_MESSAGE_U1, ROLE_MESSAGE_U2];
const FWD_ROLES = [ROLE_NOISE_FWD_U1, ROLE_NOISE_FWD_U2];
const FB_ROLES = [ROLE_NOISE_FB_U1, ROLE_NOISE_FB_U2];

export function drawBatch(cfg: ModelConfig, seed: number, base: number, B: number): Batch {
  const { n, k, p } = cfg;
  const sigmaF = Math.sqrt(snrDbToVariance(cfg.snrFDb, p));
  const sigmaFb = cfg.snrFbDb === null ? 0 : Math.sqrt(snrDbToVariance(cfg.snrFbDb, p));
  const points: [Float64Array, Float64Array] = [pamPoints(k[0]), pamPoints(k[1])];
  const labels: [Int32Array, Int32Array] = [new Int32Array(B), new Int32Array(B)];
  const theta: [Float64Array, Float64Array] = [new Float64Array(B), new Float64Array(B)];
  const zFwd: [Float64Array, Float64Array] = [new Float64Array(B * n), new Float64Array(B * n)];
  const zFb: [Float64Array, Float64Array] | null = cfg.snrFbDb === null
    ? null
    : [new Float64Array(B * n), new Float64Array(B * n)];
  for (let b = 0; b < B; b++) {
    const trial = base + b;
    for (let u = 0 as 0 | 1; u < 2; u++) {
      const idx = messageIndex(seed, MSG_ROLES[u], trial, k[u]);
      labels[u][b] = idx;
      theta[u][b] = points[u][idx];
      zFwd[u].set(normals(seed, FWD_ROLES[u], trial, n, sigmaF), b * n);
      if (zFb) zFb[u].set(normals(seed, FB_ROLES[u], trial, n, sigmaFb), b * n);
    }
  }
  return { B, labels, theta, zFwd, zFb };
}
