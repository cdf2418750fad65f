import { describe, expect, it } from "vitest";
import { Codec, ModelConfig } from "../src/model.js";
import { crc32, deserialize, roundToFloat32, serialize, tensorNames } from "../src/weights_io.js";

const CFG: ModelConfig = {
  dH: 8,
  n: 4,
  k: [1, 2],
  p: 1,
  snrFDb: 3,
  snrFbDb: null,
};

describe("weight serialization", () => {
  it("crc32 matches the zlib check value", () => {
    // standard check: crc32("123456789") = 0xCBF43926
    expect(crc32(new TextEncoder().encode("123456789"))).toBe(0xcbf43926);
  });

  it("round trips bit-exactly", () => {
    const codec = new Codec(CFG);
    codec.initWeights(42);
    roundToFloat32(codec);
    const a = serialize(codec);
    const loaded = deserialize(a);
    for (const name of tensorNames(codec)) {
      const spec = codec.ps.spec(name);
      const t = loaded.tensors.get(name)!;
      expect(t.shape).toEqual(spec.shape);
      const src = codec.ps.view(name);
      for (let i = 0; i < spec.size; i++) expect(t.data[i]).toBe(Math.fround(src[i]));
    }
    expect(loaded.header.n).toBe(4);
    expect(loaded.header.k).toEqual([1, 2]);
  });

  it("detects payload corruption", () => {
    const codec = new Codec(CFG);
    codec.initWeights(42);
    const blob = serialize(codec);
    blob[blob.length - 10] ^= 0xff;
    expect(() => deserialize(blob)).toThrow(/checksum/);
  });

  it("exported betas satisfy the average power constraint", () => {
    const codec = new Codec(CFG);
    codec.initWeights(7);
    // perturb the raw scales; the projection must keep the constraint exact
    const raw = codec.ps.view("beta_raw");
    raw.set([0.3, 1.7, -0.4, 2.2]);
    const { beta } = codec.betas();
    let meanSq = 0;
    for (const b of beta) meanSq += (b * b) / beta.length;
    expect(Math.abs(meanSq - CFG.p)).toBeLessThan(1e-12);
    const loaded = deserialize(serialize(codec));
    const hb = loaded.header.beta as number[];
    let fileMeanSq = 0;
    for (const b of hb) fileMeanSq += (b * b) / hb.length;
    expect(Math.abs(fileMeanSq - CFG.p)).toBeLessThan(1e-6);
  });
});
