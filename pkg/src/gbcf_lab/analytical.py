"""OL and EOL codec execution: scalar reference ops plus the vectorized
batch runner the Monte-Carlo harness uses.

Protocol: rounds 1-2 send each user's PAM symbol at power P and the owner
estimates it by scalar LMMSE; rounds 3..N send a power-normalized linear
combination of both users' current estimation errors, and each receiver
shrinks its error with the precomputed MMSE taps. With noisy feedback the
encoder maintains its own error mirror from the corrupted feedback and the
transmit symbol is renormalized to keep E[X^2] = P.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import channel as ch
from . import moments as mo
from . import rng

_RIDGE = 1e-12


def ol_init_estimate(y, config, user):
    """LMMSE estimate of the init-round PAM symbol from one output."""
    coeff = mo.lmmse_init_coeff(config, user)
    alpha = config.sigma2_f[user] / (config.p + config.sigma2_f[user])
    return coeff * y, alpha


def ol_encode(state, eps, params, p):
    """Refinement-round symbol from the two current estimation errors."""
    a1, a2 = state.alpha
    if a1 <= 0 or a2 <= 0:
        raise AssertionError("error variances must stay positive while encoding")
    g = params.g
    d = 1.0 + g * g + 2.0 * g * abs(state.rho)
    return math.sqrt(p / d) * (
        eps[0] / math.sqrt(a1) + eps[1] / math.sqrt(a2) * g * mo.sgn(state.rho)
    )


def ol_moments(state, params, config):
    return mo.closed_form_moments(state.alpha, state.rho, params, config)


def ol_decode_update(state, y, m):
    """Single-output MMSE update of both users' estimates; exact alpha/rho."""
    c = np.array([m.e_eps_own_y[u] / m.e_y2[u] for u in range(2)])
    theta = state.theta_hat - c * np.asarray(y)
    alpha = np.array(
        [state.alpha[u] - m.e_eps_own_y[u] ** 2 / m.e_y2[u] for u in range(2)]
    )
    e12 = (
        state.rho * math.sqrt(state.alpha[0] * state.alpha[1])
        - c[0] * m.e_eps_cross_y[0]
        - c[1] * m.e_eps_cross_y[1]
        + c[0] * c[1] * m.e_y1y2
    )
    rho = e12 / math.sqrt(alpha[0] * alpha[1])
    return mo.OlState(theta_hat=theta, alpha=alpha, rho=rho, round=state.round + 1)


def eol_decode_update(state, y_prev, y_curr, joint):
    """Two-output MMSE update from the exactly tracked joint moments."""
    taps = [
        np.linalg.solve(joint.gram[u] + _RIDGE * np.eye(2), joint.b[u])
        for u in range(2)
    ]
    v = [np.array([y_prev[u], y_curr[u]]) for u in range(2)]
    theta = np.array([state.theta_hat[u] - taps[u] @ v[u] for u in range(2)])
    alpha = np.array([state.alpha[u] - joint.b[u] @ taps[u] for u in range(2)])
    e12 = (
        joint.e_eps12
        - taps[1] @ joint.cross_b[1]
        - taps[0] @ joint.cross_b[0]
        + taps[0] @ joint.cross_gram @ taps[1]
    )
    rho = e12 / math.sqrt(alpha[0] * alpha[1])
    return mo.OlState(theta_hat=theta, alpha=alpha, rho=rho, round=state.round + 1)


def noisy_feedback_encode(state, eps_tilde, params, p, s_power):
    """Encode from feedback-corrupted errors, renormalized so the tracked
    transmit power stays at P (s_power is the tracked E[S^2] of the
    unnormalized combination)."""
    s = ol_encode(state, eps_tilde, params, p)
    return s * math.sqrt(p / s_power)


def _decode_indices(theta_hat, constellations):
    return [constellations[u].nearest_index(theta_hat[u]) for u in range(2)]


def run_analytical_trial(scheme, messages, config, params, trial_rng):
    """Scalar reference execution of one trial.

    messages are per-user bit vectors; returns (decoded bit vectors,
    TrialTranscript). The batch runner must agree with this path exactly.
    """
    n, p = config.n, config.p
    cons = [ch.pam_constellation(config.k[u]) for u in range(2)]
    idx = [ch.bits_to_index(messages[u]) for u in range(2)]
    theta = np.array([cons[u].points[idx[u]] for u in range(2)])
    plans = mo.design_plan(config, params, scheme)
    track = (
        mo.feedback_track(config, params, scheme) if config.noisy_feedback else None
    )
    x = np.zeros(n)
    y = np.zeros((2, n))
    yt = np.zeros((2, n))
    for i in range(2):
        x[i] = math.sqrt(p) * theta[i]
        y[0, i], y[1, i] = ch.transmit(x[i], config, trial_rng)
        yt[0, i] = ch.feed_back(y[0, i], 0, config, trial_rng)
        yt[1, i] = ch.feed_back(y[1, i], 1, config, trial_rng)
    theta_hat = np.array(
        [ol_init_estimate(y[u, u], config, u)[0] for u in range(2)]
    )
    state = mo.OlState(
        theta_hat=theta_hat, alpha=mo.init_alpha(config), rho=0.0, round=2
    )
    # encoder-side mirror of each receiver's estimate, built from feedback
    mirror = np.array(
        [mo.lmmse_init_coeff(config, u) * yt[u, u] for u in range(2)]
    )
    for j, plan in enumerate(plans):
        i = plan.i - 1  # 0-based symbol slot
        eps_enc = mirror - theta
        if track is None:
            x[i] = ol_encode(state, eps_enc, params, p)
        else:
            x[i] = noisy_feedback_encode(
                state, eps_enc, params, p, track.s_power[j]
            )
        y[0, i], y[1, i] = ch.transmit(x[i], config, trial_rng)
        yt[0, i] = ch.feed_back(y[0, i], 0, config, trial_rng)
        yt[1, i] = ch.feed_back(y[1, i], 1, config, trial_rng)
        cp = np.array([plan.c[u][0] for u in range(2)])
        cc = np.array([plan.c[u][1] for u in range(2)])
        if scheme == mo.SCHEME_EOL and plan.i >= 4:
            state = eol_decode_update(state, y[:, i - 1], y[:, i], plan.joint)
        else:
            state = ol_decode_update(state, y[:, i], plan.moments)
        mirror = mirror - cp * yt[:, i - 1] - cc * yt[:, i]
    decoded_idx = _decode_indices(state.theta_hat, cons)
    decoded = [ch.index_to_bits(decoded_idx[u], config.k[u]) for u in range(2)]
    return decoded, ch.TrialTranscript(x=x, y=y, y_tilde=yt)


@dataclass
class BatchResult:
    trials: int
    errors: np.ndarray  # (2,) per-user block-error counts
    power_sum: np.ndarray | None = None  # per-round sum of X^2
    extras: dict | None = None


def run_batch(scheme, config, params, seed, t0, t1, collect=None):
    """Vectorized execution of trials [t0, t1). collect: None | 'power' |
    'moments' | 'raw' (raw keeps per-trial arrays; use small batches)."""
    n, p = config.n, config.p
    trials = np.arange(t0, t1, dtype=np.uint64)
    nt = len(trials)
    cons = [ch.pam_constellation(config.k[u]) for u in range(2)]
    msg = ch.draw_messages(config, seed, trials)
    theta = np.stack([cons[u].points[msg[:, u]] for u in range(2)])
    z_fwd, z_fb = ch.draw_noise(config, seed, trials)
    plans = mo.design_plan(config, params, scheme)
    track = (
        mo.feedback_track(config, params, scheme) if config.noisy_feedback else None
    )
    x = np.zeros((n, nt))
    y = np.zeros((2, n, nt))
    yt = np.zeros((2, n, nt))
    for i in range(2):
        x[i] = math.sqrt(p) * theta[i]
        for u in range(2):
            y[u, i] = x[i] + z_fwd[u][:, i]
            yt[u, i] = y[u, i] + (z_fb[u][:, i] if z_fb is not None else 0.0)
    kappa = np.array([mo.lmmse_init_coeff(config, u) for u in range(2)])
    theta_hat = np.stack([kappa[u] * y[u, u] for u in range(2)])
    mirror = np.stack([kappa[u] * yt[u, u] for u in range(2)])
    collect_moments = collect in ("moments", "raw")
    stats = {"eps2_sum": [], "eps4_sum": [], "e12_sum": [], "e12sq_sum": []}
    raw = {"eps": [], "eps_enc": []} if collect == "raw" else None
    for j, plan in enumerate(plans):
        i = plan.i - 1
        g = params.g
        d = 1.0 + g * g + 2.0 * g * abs(plan.rho)
        scale = math.sqrt(p / d)
        a1 = scale / math.sqrt(plan.alpha[0])
        a2 = scale * g * mo.sgn(plan.rho) / math.sqrt(plan.alpha[1])
        eps_enc = mirror - theta
        s = a1 * eps_enc[0] + a2 * eps_enc[1]
        if track is not None:
            s = s * math.sqrt(p / track.s_power[j])
        x[i] = s
        for u in range(2):
            y[u, i] = x[i] + z_fwd[u][:, i]
            yt[u, i] = y[u, i] + (z_fb[u][:, i] if z_fb is not None else 0.0)
        cp = np.array([plan.c[u][0] for u in range(2)])
        cc = np.array([plan.c[u][1] for u in range(2)])
        for u in range(2):
            theta_hat[u] = theta_hat[u] - cp[u] * y[u, i - 1] - cc[u] * y[u, i]
            mirror[u] = mirror[u] - cp[u] * yt[u, i - 1] - cc[u] * yt[u, i]
        if collect_moments:
            eps = theta_hat - theta
            stats["eps2_sum"].append((eps**2).sum(axis=1))
            stats["eps4_sum"].append((eps**4).sum(axis=1))
            stats["e12_sum"].append((eps[0] * eps[1]).sum())
            stats["e12sq_sum"].append(((eps[0] * eps[1]) ** 2).sum())
            if raw is not None:
                raw["eps"].append(eps.copy())
                raw["eps_enc"].append((mirror - theta).copy())
    idx_hat = np.stack(
        [cons[u].nearest_index(theta_hat[u]) for u in range(2)]
    )
    errors = np.array([(idx_hat[u] != msg[:, u]).sum() for u in range(2)])
    power_sum = (x**2).sum(axis=1) if collect in ("power", "moments", "raw") else None
    extras = None
    if collect_moments:
        extras = {k: np.array(v) for k, v in stats.items()}
        extras["power4_sum"] = (x**4).sum(axis=1)
        if raw is not None:
            extras["eps"] = np.array(raw["eps"])
            extras["eps_enc"] = np.array(raw["eps_enc"])
            extras["x"] = x
            extras["z_fb"] = z_fb
    return BatchResult(trials=nt, errors=errors, power_sum=power_sum, extras=extras)


def run_td_batch(config, params, seed, t0, t1, collect=None):
    """Time-division baseline: each user gets N/2 exclusive rounds and runs
    the single-user specialization of the refinement recursion."""
    if config.n % 2 != 0:
        raise ValueError("time-division mode requires an even number of rounds")
    n, p = config.n, config.p
    half = n // 2
    trials = np.arange(t0, t1, dtype=np.uint64)
    nt = len(trials)
    cons = [ch.pam_constellation(config.k[u]) for u in range(2)]
    msg = ch.draw_messages(config, seed, trials)
    theta = np.stack([cons[u].points[msg[:, u]] for u in range(2)])
    z_fwd, z_fb = ch.draw_noise(config, seed, trials)
    x = np.zeros((n, nt))
    errors = np.zeros(2, dtype=np.int64)
    for u in range(2):
        st2 = config.sigma2_fb[u] if config.sigma2_fb is not None else 0.0
        plan = mo.single_user_plan(p, config.sigma2_f[u], st2, half)
        base = u * half
        x[base] = math.sqrt(p) * theta[u]
        y_own = x[base] + z_fwd[u][:, base]
        yt_own = y_own + (z_fb[u][:, base] if z_fb is not None else 0.0)
        kappa = mo.lmmse_init_coeff(config, u)
        theta_hat = kappa * y_own
        mirror = kappa * yt_own
        for r in range(half - 1):
            i = base + 1 + r
            eps_enc = mirror - theta[u]
            s = math.sqrt(p) / math.sqrt(plan.alpha[r]) * eps_enc
            s = s * plan.gamma[r]
            x[i] = s
            y_own = x[i] + z_fwd[u][:, i]
            yt_own = y_own + (z_fb[u][:, i] if z_fb is not None else 0.0)
            theta_hat = theta_hat - plan.c[r] * y_own
            mirror = mirror - plan.c[r] * yt_own
        idx_hat = cons[u].nearest_index(theta_hat)
        errors[u] = (idx_hat != msg[:, u]).sum()
    power_sum = (x**2).sum(axis=1) if collect == "power" else None
    return BatchResult(trials=nt, errors=errors, power_sum=power_sum)
