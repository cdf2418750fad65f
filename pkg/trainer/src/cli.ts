/**
 * gbcf-train: trains the learned codec at one operating point and exports
 * the weight file, a JSON training log, cross-boundary golden forward
 * cases, and the interpretation sweep.
 */

import { parseArgs } from "node:util";
import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { ModelConfig } from "./model.js";
import {
  DESK_DEFAULTS, TrainConfig, emitGoldens, flipEncoderSign, interpretSweep,
  measureSlopes, train, validateBler,
} from "./train.js";
import { roundToFloat32, serialize } from "./weights_io.js";

function usage(): never {
  console.error(
    "usage: gbcf-train --k INT --n INT --snr-f DB [--snr-fb DB|--noiseless-fb]" +
    " --batch INT --epochs INT --seed INT --out WEIGHTS_PATH" +
    " [--lr F] [--weight-decay F] [--clip F] [--val-trials INT]" +
    " [--d-h INT] [--no-canonicalize] [--quiet]",
  );
  process.exit(2);
}

export function main(argv: string[]) {
  let args;
  try {
    args = parseArgs({
      args: argv,
      options: {
        k: { type: "string" },
        n: { type: "string" },
        "snr-f": { type: "string" },
        "snr-fb": { type: "string" },
        "noiseless-fb": { type: "boolean", default: false },
        batch: { type: "string", default: String(DESK_DEFAULTS.batch) },
        epochs: { type: "string", default: String(DESK_DEFAULTS.epochs) },
        seed: { type: "string" },
        out: { type: "string" },
        lr: { type: "string", default: String(DESK_DEFAULTS.lr) },
        "weight-decay": { type: "string", default: String(DESK_DEFAULTS.weightDecay) },
        clip: { type: "string", default: String(DESK_DEFAULTS.clipNorm) },
        "val-trials": { type: "string", default: String(DESK_DEFAULTS.valTrials) },
        "d-h": { type: "string", default: "64" },
        p: { type: "string", default: "1" },
        "no-canonicalize": { type: "boolean", default: false },
        quiet: { type: "boolean", default: false },
      },
    });
  } catch (err) {
    console.error(String(err));
    usage();
  }
  const v = args.values;
  if (!v.k || !v.n || !v["snr-f"] || !v.seed || !v.out) usage();
  if (v["snr-fb"] !== undefined && v["noiseless-fb"]) {
    console.error("--snr-fb and --noiseless-fb are mutually exclusive");
    process.exit(2);
  }
  const k = Number(v.k);
  const cfg: ModelConfig = {
    dH: Number(v["d-h"]),
    n: Number(v.n),
    k: [k, k],
    p: Number(v.p),
    snrFDb: Number(v["snr-f"]),
    snrFbDb: v["snr-fb"] === undefined ? null : Number(v["snr-fb"]),
  };
  if (!(cfg.n >= 3) || !(k >= 1) || !Number.isFinite(cfg.snrFDb)) usage();
  const tc: TrainConfig = {
    batch: Number(v.batch),
    epochs: Number(v.epochs),
    seed: Number(v.seed),
    lr: Number(v.lr),
    weightDecay: Number(v["weight-decay"]),
    clipNorm: Number(v.clip),
    statsMomentum: DESK_DEFAULTS.statsMomentum,
    valTrials: Number(v["val-trials"]),
  };
  const t0 = Date.now();
  const report = v.quiet
    ? undefined
    : (step: number, out: { total: number }) => {
        if (step % 100 === 0) {
          const dt = ((Date.now() - t0) / 1000).toFixed(0);
          console.error(`step ${step} loss ${out.total.toFixed(4)} (${dt}s)`);
        }
      };
  const { codec, log } = train(cfg, tc, report);

  let slopes = measureSlopes(codec);
  let canonicalized = false;
  if (!v["no-canonicalize"] && slopes.user1 > 0 && slopes.user2 < 0) {
    flipEncoderSign(codec);
    canonicalized = true;
    slopes = measureSlopes(codec);
  }
  roundToFloat32(codec);
  slopes = measureSlopes(codec);
  const val = validateBler(codec, tc.seed, tc.valTrials);
  log.valBler = val;
  log.valBlerJoint = (val[0] + val[1]) / 2;
  log.canonicalized = canonicalized;
  log.slopes = slopes;

  const outPath = String(v.out);
  mkdirSync(dirname(outPath), { recursive: true });
  const blob = serialize(codec, {
    origin: "gbcf-trainer",
    trained: true,
    train_config: {
      batch: tc.batch, epochs: tc.epochs, seed: tc.seed, lr: tc.lr,
      weight_decay: tc.weightDecay, clip: tc.clipNorm,
      snr_f_db: cfg.snrFDb, snr_fb_db: cfg.snrFbDb,
      optimizer: "adamw", schedule: "cosine", stats_momentum: tc.statsMomentum,
      canonicalized,
    },
  });
  writeFileSync(outPath, blob);

  const base = outPath.replace(/\.gbcf$/, "");
  writeFileSync(`${base}.trainlog.json`, JSON.stringify(log, null, 1));
  writeFileSync(
    `${base}.goldens.json`,
    JSON.stringify(emitGoldens(codec, tc.seed + 999), null, 1),
  );
  const interp: Record<string, unknown> = {};
  for (const u of [1, 2] as const) {
    const sigmaF = Math.sqrt(cfg.p / Math.pow(10, cfg.snrFDb / 10));
    const { beta } = codec.betas();
    const sigma = Math.sqrt(beta[u - 1] ** 2 + sigmaF ** 2);
    const grid = new Float64Array(61);
    for (let i = 0; i < 61; i++) grid[i] = -3 * sigma + (6 * sigma * i) / 60;
    interp[`user${u}`] = interpretSweep(codec, u, grid);
  }
  writeFileSync(`${base}.interpret.json`, JSON.stringify(interp, null, 1));

  console.log(
    JSON.stringify({
      out: outPath,
      val_bler: val,
      val_bler_joint: log.valBlerJoint,
      slopes,
      canonicalized,
      seconds: (Date.now() - t0) / 1000,
    }),
  );
}

main(process.argv.slice(2));
