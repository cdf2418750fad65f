/**
 * Binary codec weight file, shared with the inference runtime:
 *
 *   "GBCF" | u32 version | u32 header_len | UTF-8 JSON header
 *   then per tensor: u32 name_len | name | u32 rank | rank x u64 dims
 *   | float32 row-major data | u32 CRC32(data)
 *
 * All integers and floats little-endian. Weights are rounded to float32
 * before serialization so the file is the single source of truth.
 */

import { Codec } from "./model.js";

export const MAGIC = "GBCF";
export const VERSION = 1;

const CRC_TABLE = (() => {
  const t = new Uint32Array(256);
  for (let i = 0; i < 256; i++) {
    let c = i;
    for (let j = 0; j < 8; j++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    t[i] = c >>> 0;
  }
  return t;
})();

export function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export interface ExportMeta {
  [key: string]: unknown;
}

/** Tensor name order matches the runtime's writer (sorted). */
export function tensorNames(codec: Codec): string[] {
  return [...codec.ps.specs.keys()].filter((n) => n !== "beta_raw").sort();
}

export function serialize(codec: Codec, meta: ExportMeta = {}): Uint8Array {
  const { n, k, p, dH } = codec.cfg;
  const { beta } = codec.betas();
  const f32 = (v: number) => Math.fround(v);
  const header = {
    d_h: dH,
    n,
    k: [k[0], k[1]],
    p,
    activation: 0,
    fe_wiring: 0,
    beta: [...beta].map(f32),
    ps_mean: [...codec.runMean].map(f32),
    ps_var: [...codec.runVar].map(f32),
    ...meta,
  };
  const headerBytes = new TextEncoder().encode(JSON.stringify(header));
  const chunks: Uint8Array[] = [];
  const u32 = (v: number) => {
    const b = new Uint8Array(4);
    new DataView(b.buffer).setUint32(0, v >>> 0, true);
    return b;
  };
  chunks.push(new TextEncoder().encode(MAGIC), u32(VERSION), u32(headerBytes.length), headerBytes);
  for (const name of tensorNames(codec)) {
    const spec = codec.ps.spec(name);
    const data = codec.ps.view(name);
    const f = new Float32Array(spec.size);
    for (let i = 0; i < spec.size; i++) f[i] = data[i];
    const payload = new Uint8Array(f.buffer.slice(0));
    const nameBytes = new TextEncoder().encode(name);
    chunks.push(u32(nameBytes.length), nameBytes, u32(spec.shape.length));
    for (const d of spec.shape) {
      const b = new Uint8Array(8);
      const dv = new DataView(b.buffer);
      dv.setUint32(0, d >>> 0, true);
      dv.setUint32(4, 0, true);
      chunks.push(b);
    }
    chunks.push(payload, u32(crc32(payload)));
  }
  let total = 0;
  for (const c of chunks) total += c.length;
  const out = new Uint8Array(total);
  let off = 0;
  for (const c of chunks) {
    out.set(c, off);
    off += c.length;
  }
  return out;
}

export interface LoadedFile {
  header: Record<string, unknown>;
  tensors: Map<string, { shape: number[]; data: Float32Array }>;
}

export function deserialize(buf: Uint8Array): LoadedFile {
  const dv = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const dec = new TextDecoder();
  if (dec.decode(buf.subarray(0, 4)) !== MAGIC) throw new Error("bad magic");
  const version = dv.getUint32(4, true);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const hlen = dv.getUint32(8, true);
  const header = JSON.parse(dec.decode(buf.subarray(12, 12 + hlen)));
  let pos = 12 + hlen;
  const tensors = new Map<string, { shape: number[]; data: Float32Array }>();
  while (pos < buf.length) {
    const nameLen = dv.getUint32(pos, true);
    pos += 4;
    const name = dec.decode(buf.subarray(pos, pos + nameLen));
    pos += nameLen;
    const rank = dv.getUint32(pos, true);
    pos += 4;
    const shape: number[] = [];
    for (let r = 0; r < rank; r++) {
      shape.push(dv.getUint32(pos, true));
      pos += 8; // dims are u64; high word is always zero here
    }
    const count = shape.reduce((a, b) => a * b, 1);
    const payload = buf.subarray(pos, pos + 4 * count);
    pos += 4 * count;
    const crc = dv.getUint32(pos, true);
    pos += 4;
    if (crc !== crc32(payload)) throw new Error(`checksum mismatch for ${name}`);
    const data = new Float32Array(count);
    const pdv = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
    for (let i = 0; i < count; i++) data[i] = pdv.getFloat32(4 * i, true);
    tensors.set(name, { shape, data });
  }
  return { header, tensors };
}

/** Rounds the in-memory parameters to float32 so later forward passes (and
 * the emitted goldens) match the file contents exactly. */
export function roundToFloat32(codec: Codec) {
  const d = codec.ps.data;
  for (let i = 0; i < d.length; i++) d[i] = Math.fround(d[i]);
  for (let i = 0; i < codec.runMean.length; i++) {
    codec.runMean[i] = Math.fround(codec.runMean[i]);
    codec.runVar[i] = Math.fround(codec.runVar[i]);
  }
}
