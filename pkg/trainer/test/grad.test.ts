import { describe, expect, it } from "vitest";
import { Codec, ModelConfig, runProtocol } from "../src/model.js";
import { drawBatch } from "../src/channel.js";
import { uniforms } from "../src/philox.js";

const TINY: ModelConfig = {
  dH: 4,
  n: 3,
  k: [1, 1],
  p: 1,
  snrFDb: 3,
  snrFbDb: null,
};

describe("analytic gradients vs central finite differences", () => {
  it("matches within relative 1e-3 on 20 random parameters", () => {
    const codec = new Codec(TINY);
    codec.initWeights(12345);
    const batch = drawBatch(TINY, 777, 0, 16);
    codec.ps.zeroGrad();
    runProtocol(codec, batch, "train", true);
    const analytic = Float64Array.from(codec.ps.grad);

    const u = uniforms(55, 9, 0, 40);
    const picks = new Set<number>();
    while (picks.size < 20) {
      picks.add(Math.floor(u[picks.size % 40] * codec.ps.length));
    }
    const h = 1e-5;
    let checked = 0;
    for (const idx of picks) {
      const orig = codec.ps.data[idx];
      codec.ps.data[idx] = orig + h;
      const plus = runProtocol(codec, batch, "train", false).total;
      codec.ps.data[idx] = orig - h;
      const minus = runProtocol(codec, batch, "train", false).total;
      codec.ps.data[idx] = orig;
      const numeric = (plus - minus) / (2 * h);
      const denom = Math.max(Math.abs(numeric), Math.abs(analytic[idx]), 1e-6);
      expect(Math.abs(numeric - analytic[idx]) / denom).toBeLessThan(1e-3);
      checked++;
    }
    expect(checked).toBe(20);
  });

  it("covers the transmit-scale parameters explicitly", () => {
    const codec = new Codec(TINY);
    codec.initWeights(999);
    const batch = drawBatch(TINY, 3, 0, 8);
    codec.ps.zeroGrad();
    runProtocol(codec, batch, "train", true);
    const spec = codec.ps.spec("beta_raw");
    const h = 1e-6;
    for (let j = 0; j < spec.size; j++) {
      const idx = spec.offset + j;
      const orig = codec.ps.data[idx];
      codec.ps.data[idx] = orig + h;
      const plus = runProtocol(codec, batch, "train", false).total;
      codec.ps.data[idx] = orig - h;
      const minus = runProtocol(codec, batch, "train", false).total;
      codec.ps.data[idx] = orig;
      const numeric = (plus - minus) / (2 * h);
      const denom = Math.max(Math.abs(numeric), Math.abs(codec.ps.grad[idx]), 1e-6);
      expect(Math.abs(numeric - codec.ps.grad[idx]) / denom).toBeLessThan(1e-3);
    }
  });
});
