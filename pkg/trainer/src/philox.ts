/**
 * Philox4x32-10 counter-based generator.
 *
 * Streams are addressed by (seed, role, trial, draw index) exactly like the
 * runtime's generator, so any batch layout reproduces the same values.
 */

const M0 = 0xd2511f53;
const M1 = 0xcd9e8d57;
const W0 = 0x9e3779b9;
const W1 = 0xbb67ae85;

function mulhi32(a: number, b: number): number {
  const aL = a & 0xffff;
  const aH = a >>> 16;
  const bL = b & 0xffff;
  const bH = b >>> 16;
  const ll = aL * bL;
  const lh = aL * bH;
  const hl = aH * bL;
  const mid = (ll >>> 16) + (lh & 0xffff) + (hl & 0xffff);
  return (aH * bH + (lh >>> 16) + (hl >>> 16) + (mid >>> 16)) >>> 0;
}

/** One 10-round Philox4x32 block. Counter and key words are uint32. */
export function philoxBlock(
  c0: number, c1: number, c2: number, c3: number,
  key0: number, key1: number,
): [number, number, number, number] {
  let k0 = key0 >>> 0;
  let k1 = key1 >>> 0;
  let v0 = c0 >>> 0, v1 = c1 >>> 0, v2 = c2 >>> 0, v3 = c3 >>> 0;
  for (let r = 0; r < 10; r++) {
    if (r > 0) {
      k0 = (k0 + W0) >>> 0;
      k1 = (k1 + W1) >>> 0;
    }
    const hi0 = mulhi32(M0, v0);
    const lo0 = Math.imul(M0, v0) >>> 0;
    const hi1 = mulhi32(M1, v2);
    const lo1 = Math.imul(M1, v2) >>> 0;
    const n0 = (hi1 ^ v1 ^ k0) >>> 0;
    const n1 = lo1;
    const n2 = (hi0 ^ v3 ^ k1) >>> 0;
    const n3 = lo0;
    v0 = n0; v1 = n1; v2 = n2; v3 = n3;
  }
  return [v0, v1, v2, v3];
}

export interface StreamKey {
  seed: number; // uint-ish; split into two 32-bit key words
  role: number;
}

function keyWords(seed: number): [number, number] {
  const lo = seed >>> 0;
  const hi = Math.floor(seed / 0x100000000) >>> 0;
  return [lo, hi];
}

/** draws doubles in (0,1) with 53-bit resolution for one trial id. */
export function uniforms(seed: number, role: number, trial: number, draws: number): Float64Array {
  const [k0, k1] = keyWords(seed);
  const tLo = trial >>> 0;
  const tHi = Math.floor(trial / 0x100000000) >>> 0;
  const out = new Float64Array(draws);
  const nBlocks = (draws + 1) >> 1;
  for (let blk = 0; blk < nBlocks; blk++) {
    const [w0, w1, w2, w3] = philoxBlock(blk, role, tLo, tHi, k0, k1);
    const a = (w0 * 2097152 + (w1 >>> 11)) ; // w0 << 21 | w1 >> 11, exact in doubles
    const b = (w2 * 2097152 + (w3 >>> 11));
    const i = blk * 2;
    out[i] = (a + 0.5) * Math.pow(2, -53);
    if (i + 1 < draws) out[i + 1] = (b + 0.5) * Math.pow(2, -53);
  }
  return out;
}

/** Standard normals via Box-Muller on consecutive uniform pairs. */
export function normals(seed: number, role: number, trial: number, draws: number, sigma = 1): Float64Array {
  const u = uniforms(seed, role, trial, 2 * draws);
  const out = new Float64Array(draws);
  for (let i = 0; i < draws; i++) {
    const r = Math.sqrt(-2 * Math.log(u[2 * i]));
    out[i] = sigma * r * Math.cos(2 * Math.PI * u[2 * i + 1]);
  }
  return out;
}

/** Uniform integer in [0, 2^bits); bits <= 24. */
export function messageIndex(seed: number, role: number, trial: number, bits: number): number {
  const [k0, k1] = keyWords(seed);
  const tLo = trial >>> 0;
  const tHi = Math.floor(trial / 0x100000000) >>> 0;
  const [w0] = philoxBlock(0, role, tLo, tHi, k0, k1);
  return w0 & ((1 << bits) - 1);
}

export const ROLE_NOISE_FWD_U1 = 0;
export const ROLE_NOISE_FWD_U2 = 1;
export const ROLE_NOISE_FB_U1 = 2;
export const ROLE_NOISE_FB_U2 = 3;
export const ROLE_MESSAGE_U1 = 4;
export const ROLE_MESSAGE_U2 = 5;
export const ROLE_WEIGHT_INIT = 10;
