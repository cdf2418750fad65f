"""Generate the checked-in fixture weight file and its golden forward
vectors.

The fixture is deterministic pseudo-random (not trained); it exists so the
runtime test suite can exercise loading and the forward pass without any
training artifacts. Run from the repo root:

    python scripts/make_fixture.py

Regenerating overwrites tests/fixtures/; the goldens are frozen expected
values, so regenerate only when the file format itself changes.
"""

import json
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from gbcf_lab import neural, rng
from gbcf_lab.weights import (
    CodecWeights,
    FeParams,
    HeadParams,
    MlpParams,
    save_weights,
)

SEED = 0x5EED_F1C5
OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"


class Drawer:
    """Deterministic stream of standard normals for weight generation."""

    def __init__(self, seed):
        self.seed = seed
        self.cursor = 0

    def take(self, *shape):
        count = int(np.prod(shape))
        vals = rng.normals(self.seed, 0, [self.cursor], count)[0]
        self.cursor += 1
        return vals.reshape(shape).astype(np.float32)


def make_fe(d, in_dim, d_h):
    return FeParams(
        w1=d.take(d_h, in_dim) / np.float32(np.sqrt(in_dim)),
        b1=d.take(d_h) * np.float32(0.1),
        w2=d.take(d_h, d_h) / np.float32(np.sqrt(d_h)),
        b2=d.take(d_h) * np.float32(0.1),
        ln_g=np.ones(d_h, dtype=np.float32) + d.take(d_h) * np.float32(0.05),
        ln_b=d.take(d_h) * np.float32(0.05),
    )


def make_fixture(n=3, k=(1, 1), d_h=64, p=1.0):
    d = Drawer(SEED)
    c = [2**kk for kk in k]
    w = CodecWeights(
        d_h=d_h,
        n=n,
        k=k,
        p=p,
        activation=0,
        fe_wiring=0,
        beta=np.full(n, np.sqrt(p), dtype=np.float32),
        ps_mean=np.zeros(n - 2, dtype=np.float32),
        ps_var=np.ones(n - 2, dtype=np.float32),
        fe_enc=make_fe(d, 3 * (n - 1), d_h),
        mlp_enc=MlpParams(
            w1=d.take(d_h, d_h) / np.float32(np.sqrt(d_h)),
            b1=d.take(d_h) * np.float32(0.1),
            w2=d.take(1, d_h) / np.float32(np.sqrt(d_h)),
            b2=d.take(1) * np.float32(0.1),
        ),
        fe_dec=(make_fe(d, n, d_h), make_fe(d, n, d_h)),
        mlp_dec=(
            HeadParams(w=d.take(c[0], d_h) / np.float32(np.sqrt(d_h)), b=d.take(c[0]) * np.float32(0.1)),
            HeadParams(w=d.take(c[1], d_h) / np.float32(np.sqrt(d_h)), b=d.take(c[1]) * np.float32(0.1)),
        ),
        meta={"origin": "fixture", "trained": False},
    )
    return w


def make_goldens(w, path):
    d = Drawer(SEED + 1)
    cases = {"encoder": [], "decoder": []}
    for _ in range(8):
        x_hist = d.take(2).astype(np.float32)
        fb1 = d.take(2).astype(np.float32)
        fb2 = d.take(2).astype(np.float32)
        x = neural.encode_round((x_hist, fb1, fb2), 3, w)
        cases["encoder"].append(
            {
                "round": 3,
                "x_hist": [float(v) for v in x_hist],
                "fb1": [float(v) for v in fb1],
                "fb2": [float(v) for v in fb2],
                "x": float(x),
            }
        )
    for u in (0, 1):
        for _ in range(8):
            y = d.take(w.n).astype(np.float32)
            logits = neural.decoder_logits(y, u, w)
            probs, index, _ = neural.decode(y, u, w)
            cases["decoder"].append(
                {
                    "user": u,
                    "y": [float(v) for v in y],
                    "logits": [float(v) for v in logits],
                    "probs": [float(v) for v in probs],
                    "index": int(index),
                }
            )
    path.write_text(json.dumps(cases, indent=1))


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    w = make_fixture()
    save_weights(w, OUT / "fixture_k1n3.gbcf")
    make_goldens(w, OUT / "golden_k1n3.json")
    print("wrote", OUT / "fixture_k1n3.gbcf")
