import { describe, expect, it } from "vitest";
import { nllLoss, softmaxRows, lnForward, bnForward } from "../src/nn.js";

describe("nll loss", () => {
  it("perfect one-hot prediction gives zero", () => {
    const p = new Float64Array([1, 0, 0, 1]); // two rows, C=2
    const labels = new Int32Array([0, 1]);
    expect(nllLoss(p, labels, 2, 2)).toBe(0);
  });
  it("uniform prediction over two classes gives log 2", () => {
    const p = new Float64Array([0.5, 0.5]);
    expect(nllLoss(p, new Int32Array([1]), 1, 2)).toBeCloseTo(Math.log(2), 12);
  });
  it("batch mean of per-sample losses", () => {
    const p = new Float64Array([0.25, 0.75, 0.9, 0.1]);
    const labels = new Int32Array([1, 0]);
    const want = (-Math.log(0.75) - Math.log(0.9)) / 2;
    expect(nllLoss(p, labels, 2, 2)).toBeCloseTo(want, 12);
  });
  it("clamps a zero probability instead of diverging", () => {
    const p = new Float64Array([1, 0]);
    const loss = nllLoss(p, new Int32Array([1]), 1, 2);
    expect(Number.isFinite(loss)).toBe(true);
    expect(loss).toBeCloseTo(-Math.log(1e-12), 6);
  });
});

describe("softmax", () => {
  it("rows sum to one and dominate at the max logit", () => {
    const logits = new Float64Array([1, 3, 2, -5, 0, 5]);
    const p = softmaxRows(logits, 2, 3);
    expect(p[0] + p[1] + p[2]).toBeCloseTo(1, 12);
    expect(p[3] + p[4] + p[5]).toBeCloseTo(1, 12);
    expect(Math.max(p[0], p[1], p[2])).toBe(p[1]);
  });
});

describe("normalization blocks", () => {
  it("layer norm output has zero mean, unit variance per row", () => {
    const d = 32;
    const r = new Float64Array(d);
    for (let i = 0; i < d; i++) r[i] = Math.sin(i * 1.7) * 3 + 1;
    const g = new Float64Array(d).fill(1);
    const b = new Float64Array(d);
    const { out } = lnForward(r, g, b, 1, d);
    let mean = 0;
    for (const v of out) mean += v / d;
    let variance = 0;
    for (const v of out) variance += ((v - mean) * (v - mean)) / d;
    expect(Math.abs(mean)).toBeLessThan(1e-12);
    expect(variance).toBeGreaterThan(1 - 1e-5);
    expect(variance).toBeLessThan(1 + 1e-5);
  });
  it("batch standardization matches its definition", () => {
    const s = new Float64Array([1, 2, 3, 4]);
    const { xhat, mean, variance } = bnForward(s);
    expect(mean).toBeCloseTo(2.5, 12);
    expect(variance).toBeCloseTo(1.25, 12);
    expect(xhat[0]).toBeCloseTo((1 - 2.5) / Math.sqrt(1.25 + 1e-6), 12);
  });
});
