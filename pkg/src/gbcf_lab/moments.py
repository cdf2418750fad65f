"""Exact second-moment recursions for the OL and EOL feedback codecs.

Every quantity in a trial is a linear combination of the primitive random
variables (two unit-power PAM symbols plus all channel/feedback noises), so
joint second moments evolve by exact bilinear algebra. Two trackers live
here:

* the design tracker: the noiseless recursion over the joint moments of
  (eps1, eps2, Y1_prev, Y2_prev) that fixes each round's encoder scaling and
  decoder taps (OL uses the current output only; EOL regresses on the current
  and previous outputs);
* the feedback tracker: the true moments when the encoder only sees
  noise-corrupted feedback and therefore works with its own error mirror;
  it yields the per-round renormalization that restores E[X^2] = P.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SCHEME_OL = "ol"
SCHEME_EOL = "eol"

_RIDGE = 1e-12  # Tikhonov floor for the 2x2 normal equations


def sgn(x):
    """Sign with sgn(0) = +1, the convention the encoder and decoder share."""
    return 1.0 if x >= 0 else -1.0


@dataclass(frozen=True)
class OlParams:
    g: float = 1.0
    lmmse_init: bool = True

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("g must be nonnegative")


@dataclass
class OlState:
    """Per-user running estimates and the codec's sufficient statistics."""

    theta_hat: np.ndarray  # (2,)
    alpha: np.ndarray  # (2,) error variances
    rho: float
    round: int


@dataclass(frozen=True)
class MomentSet:
    """Closed-form second moments entering one refinement round."""

    e_y2: tuple  # E[Y_u^2]
    e_eps_own_y: tuple  # E[eps_u Y_u]
    e_eps_cross_y: tuple  # E[eps_ubar Y_u]
    e_y1y2: float


@dataclass(frozen=True)
class EolJointMoments:
    """Joint moments for the two-output MMSE update at one round.

    Regressor vector per user is V_u = (Y_u_prev, Y_u_curr).
    """

    b: np.ndarray  # (2, 2) b[u] = E[eps_u V_u]
    gram: np.ndarray  # (2, 2, 2) per-user Gram of V_u
    cross_b: np.ndarray  # (2, 2) cross_b[u] = E[eps_ubar V_u]
    cross_gram: np.ndarray  # (2, 2) [j, k] = E[V1_j V2_k]
    e_eps12: float  # E[eps1 eps2]


@dataclass(frozen=True)
class RoundPlan:
    """Everything a trial needs to execute one refinement round."""

    i: int
    alpha: tuple  # entering error variances
    rho: float
    d: float
    enc: tuple  # X = enc[0]*eps1 + enc[1]*eps2
    e_x2: float  # tracked transmit power (identity: equals P)
    moments: MomentSet
    c: tuple  # ((c_prev_1, c_curr_1), (c_prev_2, c_curr_2)) decoder taps
    joint: EolJointMoments
    alpha_out: tuple
    rho_out: float


def lmmse_init_coeff(config, user):
    """Scalar LMMSE gain for the init round: theta_hat = coeff * y."""
    p, s2 = config.p, config.sigma2_f[user]
    return math.sqrt(p) / (p + s2)


def init_alpha(config):
    p = config.p
    return np.array([s2 / (p + s2) for s2 in config.sigma2_f])


def closed_form_moments(alpha, rho, params, config):
    """The textbook moment expressions in terms of (alpha, rho, g, P)."""
    p, g = config.p, params.g
    d = 1.0 + g * g + 2.0 * g * abs(rho)
    root = math.sqrt(p / d)
    b1 = root * math.sqrt(alpha[0]) * (1.0 + g * abs(rho))
    b2 = root * math.sqrt(alpha[1]) * (g + abs(rho)) * sgn(rho)
    return MomentSet(
        e_y2=(p + config.sigma2_f[0], p + config.sigma2_f[1]),
        e_eps_own_y=(b1, b2),
        # feedforward noise is independent of the errors, so the cross
        # moment with the other user's output equals the moment with X
        e_eps_cross_y=(b2, b1),
        e_y1y2=p,
    )


def _solve_taps(b_vec, gram):
    g = gram + _RIDGE * np.eye(2)
    return np.linalg.solve(g, b_vec)


@lru_cache(maxsize=None)
def design_plan(config, params, scheme):
    """Noiseless design recursion for rounds 3..N.

    State is the 4x4 second-moment matrix of (eps1, eps2, R1, R2) where R_u
    is user u's most recent channel output; R becomes meaningful once the
    first refinement round has produced one, which is why the first
    refinement (and every OL round) regresses on the current output alone.
    """
    if scheme not in (SCHEME_OL, SCHEME_EOL):
        raise ValueError(f"unknown analytical scheme {scheme!r}")
    p, g, n = config.p, params.g, config.n
    s2 = config.sigma2_f
    m = np.zeros((4, 4))
    m[0, 0], m[1, 1] = init_alpha(config)
    plans = []
    for i in range(3, n + 1):
        alpha = (m[0, 0], m[1, 1])
        rho = m[0, 1] / math.sqrt(alpha[0] * alpha[1])
        d = 1.0 + g * g + 2.0 * g * abs(rho)
        root = math.sqrt(p / d)
        enc = (root / math.sqrt(alpha[0]), root * g * sgn(rho) / math.sqrt(alpha[1]))
        kvec = np.array([enc[0], enc[1], 0.0, 0.0])
        e_x2 = kvec @ m @ kvec
        mk = m @ kvec  # E[v X]
        moments = closed_form_moments(alpha, rho, params, config)
        e_y2 = moments.e_y2
        b = np.array(
            [[m[0, 2], mk[0]], [m[1, 3], mk[1]]]
        )  # b[u] = (E[eps_u R_u], E[eps_u O_u])
        gram = np.array(
            [
                [[m[2, 2], mk[2]], [mk[2], e_y2[0]]],
                [[m[3, 3], mk[3]], [mk[3], e_y2[1]]],
            ]
        )
        cross_b = np.array([[m[1, 2], mk[1]], [m[0, 3], mk[0]]])
        cross_gram = np.array([[m[2, 3], mk[2]], [mk[3], p]])
        joint = EolJointMoments(
            b=b, gram=gram, cross_b=cross_b, cross_gram=cross_gram, e_eps12=m[0, 1]
        )
        if scheme == SCHEME_EOL and i >= 4:
            taps = tuple(tuple(_solve_taps(b[u], gram[u])) for u in range(2))
        else:
            taps = tuple((0.0, b[u, 1] / e_y2[u]) for u in range(2))
        # state update: v' = A v + B z with z = (Z1, Z2)
        a = np.zeros((4, 4))
        bmat = np.zeros((4, 2))
        for u in range(2):
            a[u, u] = 1.0
            a[u] -= taps[u][1] * kvec
            a[u, 2 + u] -= taps[u][0]
            bmat[u, u] = -taps[u][1]
            a[2 + u] = kvec
            bmat[2 + u, u] = 1.0
        m = a @ m @ a.T + bmat @ np.diag(s2) @ bmat.T
        alpha_out = (m[0, 0], m[1, 1])
        rho_out = m[0, 1] / math.sqrt(alpha_out[0] * alpha_out[1])
        if abs(rho_out) > 1.0 + 1e-9:
            raise AssertionError("correlation left [-1, 1]")
        rho_out = max(-1.0, min(1.0, rho_out))
        m[0, 1] = m[1, 0] = rho_out * math.sqrt(alpha_out[0] * alpha_out[1])
        plans.append(
            RoundPlan(
                i=i,
                alpha=alpha,
                rho=rho,
                d=d,
                enc=enc,
                e_x2=e_x2,
                moments=moments,
                c=taps,
                joint=joint,
                alpha_out=alpha_out,
                rho_out=rho_out,
            )
        )
    return tuple(plans)


@dataclass(frozen=True)
class FeedbackTrack:
    """True moments of a run whose encoder sees noisy feedback.

    s_power[j] is E[S^2] of round j+3's unnormalized combination; gamma[j] is
    the renormalization sqrt(P / E[S^2]); alpha/rho are the true receiver
    moments (they coincide with the design values when feedback is clean).
    """

    s_power: tuple
    gamma: tuple
    alpha: tuple  # per round, (alpha1, alpha2) after the round
    rho: tuple


# state indices for the feedback tracker
_E1, _E2, _T1, _T2, _R1, _R2, _S1, _S2 = range(8)


@lru_cache(maxsize=None)
def feedback_track(config, params, scheme):
    """Propagate true second moments of (eps, encoder mirror eps, retained
    outputs on both sides) through the design plan under noisy feedback."""
    plans = design_plan(config, params, scheme)
    p = config.p
    s2 = config.sigma2_f
    st2 = config.sigma2_fb if config.sigma2_fb is not None else (0.0, 0.0)
    m = np.zeros((8, 8))
    alpha0 = init_alpha(config)
    for u in range(2):
        kappa = lmmse_init_coeff(config, u)
        m[_E1 + u, _E1 + u] = alpha0[u]
        m[_T1 + u, _T1 + u] = alpha0[u] + kappa * kappa * st2[u]
        m[_E1 + u, _T1 + u] = m[_T1 + u, _E1 + u] = alpha0[u]
    noise_cov = np.diag([s2[0], s2[1], st2[0], st2[1]])
    s_power, gamma, alphas, rhos = [], [], [], []
    for plan in plans:
        f = np.zeros(8)
        f[_T1] = plan.enc[0]
        f[_T2] = plan.enc[1]
        es2 = f @ m @ f
        gam = math.sqrt(p / es2)
        k = gam * f
        a = np.zeros((8, 8))
        b = np.zeros((8, 4))
        for u in range(2):
            cp, cc = plan.c[u]
            a[_E1 + u, _E1 + u] = 1.0
            a[_E1 + u] -= cc * k
            a[_E1 + u, _R1 + u] -= cp
            b[_E1 + u, u] = -cc
            a[_T1 + u, _T1 + u] = 1.0
            a[_T1 + u] -= cc * k
            a[_T1 + u, _S1 + u] -= cp
            b[_T1 + u, u] = -cc
            b[_T1 + u, 2 + u] = -cc
            a[_R1 + u] = k
            b[_R1 + u, u] = 1.0
            a[_S1 + u] = k
            b[_S1 + u, u] = 1.0
            b[_S1 + u, 2 + u] = 1.0
        m = a @ m @ a.T + b @ noise_cov @ b.T
        s_power.append(es2)
        gamma.append(gam)
        al = (m[_E1, _E1], m[_E2, _E2])
        alphas.append(al)
        rhos.append(m[_E1, _E2] / math.sqrt(al[0] * al[1]))
    return FeedbackTrack(
        s_power=tuple(s_power), gamma=tuple(gamma), alpha=tuple(alphas), rho=tuple(rhos)
    )


@dataclass(frozen=True)
class SingleUserPlan:
    """Design recursion for one user refined alone (the time-division slot)."""

    alpha: tuple  # entering alpha per refinement round
    b: tuple  # E[eps Y] per round
    c: tuple  # decoder tap per round
    gamma: tuple  # noisy-feedback renormalization per round
    s_power: tuple


@lru_cache(maxsize=None)
def single_user_plan(p, s2, st2, rounds):
    """One init round + (rounds-1) refinements of a single-user run.

    This is the OL recursion with the second user's branch weighted to zero.
    """
    alpha = s2 / (p + s2)  # noiseless design recursion drives enc and c
    kappa = math.sqrt(p) / (p + s2)
    # true moments of (eps, encoder mirror) drive the renormalization
    m = np.array([[alpha, alpha], [alpha, alpha + kappa * kappa * st2]])
    alphas, bs, cs, gammas, powers = [], [], [], [], []
    for _ in range(rounds - 1):
        enc = math.sqrt(p) / math.sqrt(alpha)
        es2 = enc * enc * m[1, 1]
        gam = math.sqrt(p / es2)
        b = math.sqrt(p * alpha)
        c = b / (p + s2)
        alphas.append(alpha)
        bs.append(b)
        cs.append(c)
        gammas.append(gam)
        powers.append(es2)
        k = gam * enc
        # eps' = eps - c(k*mirror + Z); mirror' = mirror - c(k*mirror + Z + Zt)
        a = np.array([[1.0, -c * k], [0.0, 1.0 - c * k]])
        bn = np.array([[-c, 0.0], [-c, -c]])
        m = a @ m @ a.T + bn @ np.diag([s2, st2]) @ bn.T
        alpha = alpha * s2 / (p + s2)
    return SingleUserPlan(
        alpha=tuple(alphas),
        b=tuple(bs),
        c=tuple(cs),
        gamma=tuple(gammas),
        s_power=tuple(powers),
    )
