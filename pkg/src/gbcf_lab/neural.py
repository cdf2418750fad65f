"""Deterministic forward-pass runtime for the learned codec.

Encoder input at round i is three fixed-length blocks (past transmitted
symbols, user-1 feedback, user-2 feedback), each of length N-1 and
zero-padded beyond position i-1. The raw encoder scalar is standardized by
frozen per-round statistics and scaled by the learned per-round beta. Each
decoder maps its N received symbols to 2^K index probabilities.

Everything runs in float32 and is a pure function of (weights, inputs).
"""

import math

import numpy as np

from . import channel as ch
from . import rng
from .weights import ACTIVATIONS, LN_EPS, PS_EPS


def _act(w):
    name = ACTIVATIONS[w.activation]
    return {"tanh": np.tanh}[name]


def _fe_normalized(x, fe, activation, wiring):
    """FE up to (and excluding) the layer-norm gain/bias; returns the
    zero-mean unit-variance activations."""
    x = np.asarray(x, dtype=np.float32)
    h1 = activation(x @ fe.w1.T + fe.b1)
    h2 = h1 @ fe.w2.T + fe.b2
    r = h2 + h1 if wiring == 0 else h2
    mean = r.mean(axis=-1, keepdims=True, dtype=np.float32)
    var = np.square(r - mean).mean(axis=-1, keepdims=True, dtype=np.float32)
    return ((r - mean) / np.sqrt(var + np.float32(LN_EPS))).astype(np.float32)


def fe_forward(x, fe, activation, wiring=0):
    """Feature extractor: affine, activation, affine, residual combination,
    layer normalization with learned gain/bias. Output width d_h."""
    x = np.asarray(x, dtype=np.float32)
    if x.shape[-1] != fe.w1.shape[1]:
        raise ValueError(
            f"input length {x.shape[-1]} does not match extractor ({fe.w1.shape[1]})"
        )
    return _fe_normalized(x, fe, activation, wiring) * fe.ln_g + fe.ln_b


def encoder_raw(q, w):
    """Raw (pre-normalization) encoder scalar for input vector(s) q."""
    act = _act(w)
    f = fe_forward(q, w.fe_enc, act, w.fe_wiring)
    h = act(f @ w.mlp_enc.w1.T + w.mlp_enc.b1)
    return (h @ w.mlp_enc.w2.T + w.mlp_enc.b2)[..., 0]


def build_encoder_input(x_hist, fb1, fb2, n):
    """Assemble the padded three-block encoder input.

    x_hist/fb1/fb2 may be shorter than n-1; missing positions are zero
    ("the pad positions are exactly zero").
    Accepts 1-D histories (one trial) or 2-D (batch, t) histories.
    """
    x_hist = np.atleast_2d(np.asarray(x_hist, dtype=np.float32))
    fb1 = np.atleast_2d(np.asarray(fb1, dtype=np.float32))
    fb2 = np.atleast_2d(np.asarray(fb2, dtype=np.float32))
    b = x_hist.shape[0]
    blk = n - 1
    q = np.zeros((b, 3 * blk), dtype=np.float32)
    q[:, : x_hist.shape[1]] = x_hist
    q[:, blk : blk + fb1.shape[1]] = fb1
    q[:, 2 * blk : 2 * blk + fb2.shape[1]] = fb2
    return q


def encode_round(history, i, w):
    """Transmit symbol for refinement round i (3 <= i <= N).

    history = (x_hist, fb1, fb2), each covering rounds 1..i-1.
    """
    if not 3 <= i <= w.n:
        raise ValueError(f"learned encoding runs rounds 3..{w.n}; got {i}")
    x_hist, fb1, fb2 = history
    q = build_encoder_input(x_hist, fb1, fb2, w.n)
    s = encoder_raw(q, w)
    mu = w.ps_mean[i - 3]
    var = w.ps_var[i - 3]
    x = (s - mu) / np.float32(math.sqrt(var + PS_EPS)) * w.beta[i - 1]
    return x if x.shape[0] > 1 else float(x[0])


def init_rounds(theta, w):
    """PAM init: X_1 = beta_1 * Theta_1, X_2 = beta_2 * Theta_2."""
    return float(w.beta[0]) * theta[0], float(w.beta[1]) * theta[1]


def softmax(logits):
    # logits are float32; the normalization itself runs in float64 so the
    # probabilities sum to 1 at 1e-9
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def decoder_logits(y, u, w):
    y = np.asarray(y, dtype=np.float32)
    act = _act(w)
    f = fe_forward(y, w.fe_dec[u], act, w.fe_wiring)
    return f @ w.mlp_dec[u].w.T + w.mlp_dec[u].b


def decode(y, u, w):
    """Decode user u's N received symbols: (probabilities, index, bits).

    Ties in the argmax resolve to the smaller index.
    """
    y = np.asarray(y, dtype=np.float32)
    if y.shape[-1] != w.n:
        raise ValueError(f"decoder expects {w.n} received symbols")
    probs = softmax(decoder_logits(y, u, w))
    if probs.ndim == 1:
        index = int(np.argmax(probs))
        return probs, index, ch.index_to_bits(index, w.k[u])
    return probs, np.argmax(probs, axis=-1), None


def _check_match(config, w):
    if w.n != config.n or tuple(w.k) != tuple(config.k):
        raise ValueError(
            f"weights built for n={w.n}, k={w.k}; experiment has "
            f"n={config.n}, k={config.k}"
        )
    if abs(w.p - config.p) > 1e-6:
        raise ValueError(f"weights trained at P={w.p}, experiment has P={config.p}")


def run_neural_batch(config, w, seed, t0, t1, collect=None):
    """Vectorized protocol execution for trials [t0, t1)."""
    from .analytical import BatchResult  # shared result shape

    _check_match(config, w)
    n = config.n
    trials = np.arange(t0, t1, dtype=np.uint64)
    nt = len(trials)
    cons = [ch.pam_constellation(config.k[u]) for u in range(2)]
    msg = ch.draw_messages(config, seed, trials)
    theta = np.stack([cons[u].points[msg[:, u]] for u in range(2)])
    z_fwd, z_fb = ch.draw_noise(config, seed, trials)
    x = np.zeros((n, nt), dtype=np.float32)
    y = np.zeros((2, n, nt), dtype=np.float32)
    yt = np.zeros((2, n, nt), dtype=np.float32)
    for i in range(2):
        x[i] = w.beta[i] * theta[i]
        for u in range(2):
            y[u, i] = x[i] + z_fwd[u][:, i]
            yt[u, i] = y[u, i] + (z_fb[u][:, i] if z_fb is not None else 0.0)
    for i in range(3, n + 1):
        hist = (x[: i - 1].T, yt[0, : i - 1].T, yt[1, : i - 1].T)
        x[i - 1] = encode_round(hist, i, w)
        for u in range(2):
            y[u, i - 1] = x[i - 1] + z_fwd[u][:, i - 1]
            yt[u, i - 1] = y[u, i - 1] + (
                z_fb[u][:, i - 1] if z_fb is not None else 0.0
            )
    errors = np.zeros(2, dtype=np.int64)
    for u in range(2):
        _, idx_hat, _ = decode(y[u].T, u, w)
        errors[u] = (idx_hat != msg[:, u]).sum()
    power_sum = (
        (x.astype(np.float64) ** 2).sum(axis=1) if collect == "power" else None
    )
    extras = None
    if collect == "observations":
        extras = {"y": y, "messages": msg}
    return BatchResult(
        trials=nt, errors=errors, power_sum=power_sum, extras=extras
    )


def run_neural_trial(messages, config, w, trial_rng):
    """Scalar reference execution of one trial; returns decoded bit vectors."""
    _check_match(config, w)
    n = config.n
    cons = [ch.pam_constellation(config.k[u]) for u in range(2)]
    idx = [ch.bits_to_index(messages[u]) for u in range(2)]
    theta = [cons[u].points[idx[u]] for u in range(2)]
    x = np.zeros(n, dtype=np.float32)
    y = np.zeros((2, n), dtype=np.float32)
    yt = np.zeros((2, n), dtype=np.float32)
    x[0], x[1] = init_rounds(theta, w)
    for i in range(2):
        y[0, i], y[1, i] = ch.transmit(float(x[i]), config, trial_rng)
        yt[0, i] = ch.feed_back(y[0, i], 0, config, trial_rng)
        yt[1, i] = ch.feed_back(y[1, i], 1, config, trial_rng)
    for i in range(3, n + 1):
        x[i - 1] = encode_round((x[: i - 1], yt[0, : i - 1], yt[1, : i - 1]), i, w)
        y[0, i - 1], y[1, i - 1] = ch.transmit(float(x[i - 1]), config, trial_rng)
        yt[0, i - 1] = ch.feed_back(y[0, i - 1], 0, config, trial_rng)
        yt[1, i - 1] = ch.feed_back(y[1, i - 1], 1, config, trial_rng)
    out = []
    for u in range(2):
        _, _, bits = decode(y[u], u, w)
        out.append(bits)
    return out


def interpret_sweep(w, config, fix_user, grid, round_index=3):
    """Encoder response to one feedback coordinate.

    Fixes the named user's message index to 0 and its forward noises to 0,
    fixes the swept user's message index to 0 and every other noise to 0,
    then sweeps the swept user's own init-round feedback over `grid` and
    records the round-`round_index` symbol. Returns the sweep table plus a
    least-squares line fit.
    """
    _check_match(config, w)
    if fix_user not in (1, 2):
        raise ValueError("fix_user must be 1 or 2")
    if not 3 <= round_index <= w.n:
        raise ValueError(f"round must be in 3..{w.n}")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    vary = 2 if fix_user == 1 else 1  # the user whose feedback is swept
    n = w.n
    cons = [ch.pam_constellation(config.k[u]) for u in range(2)]
    theta = [cons[u].points[0] for u in range(2)]
    b = grid.size
    x = np.zeros((n, b), dtype=np.float32)
    yt = np.zeros((2, n, b), dtype=np.float32)
    for i in range(2):
        x[i] = w.beta[i] * theta[i]
        yt[0, i] = x[i]
        yt[1, i] = x[i]  # all noises fixed to zero
    yt[vary - 1, vary - 1] = grid  # the swept feedback coordinate
    out = None
    for i in range(3, round_index + 1):
        hist = (x[: i - 1].T, yt[0, : i - 1].T, yt[1, : i - 1].T)
        xi = encode_round(hist, i, w)
        x[i - 1] = xi
        yt[0, i - 1] = xi
        yt[1, i - 1] = xi
        out = xi
    out = np.asarray(out, dtype=np.float64)
    gvar = grid.var()
    if gvar == 0.0:
        return {
            "grid": grid,
            "x": out,
            "slope": None,
            "intercept": None,
            "r2": None,
            "degenerate": True,
        }
    slope, intercept = np.polyfit(grid, out, 1)
    resid = out - (slope * grid + intercept)
    total = ((out - out.mean()) ** 2).sum()
    r2 = 1.0 - resid @ resid / total if total > 0 else 1.0
    return {
        "grid": grid,
        "x": out,
        "slope": float(slope),
        "intercept": float(intercept),
        "r2": float(r2),
        "degenerate": False,
    }
