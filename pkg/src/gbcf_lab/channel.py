"""Two-user Gaussian broadcast channel: configuration, PAM mapping, and the
per-symbol transmit/feedback primitives every scheme runs on.

Model: Y_{u,i} = X_i + Z_{u,i} with Z_{u,i} ~ N(0, sigma2_f[u]) i.i.d. across
users and time; feedback is either the exact channel output or
Y_{u,i} + Ztilde_{u,i} with Ztilde ~ N(0, sigma2_fb[u]).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng

MAX_PAM_BITS = 24  # beyond this the constellation spacing hits float precision


def snr_db_to_variance(snr_db, p):
    """Noise variance that puts average power p at the given SNR in dB."""
    if p <= 0:
        raise ValueError("power must be positive")
    return p / 10.0 ** (snr_db / 10.0)


def variance_to_snr_db(var, p):
    return 10.0 * math.log10(p / var)


@dataclass(frozen=True)
class ChannelConfig:
    """Experiment ground truth: power, noise variances, blocklength, bits.

    sigma2_fb is None for noiseless feedback.
    """

    p: float
    sigma2_f: tuple
    n: int
    k: tuple
    sigma2_fb: tuple | None = None

    def __post_init__(self):
        if self.p <= 0:
            raise ValueError("p must be positive")
        if self.n < 2:
            raise ValueError("n must be >= 2 (both init rounds are mandatory)")
        if len(self.sigma2_f) != 2 or any(s <= 0 for s in self.sigma2_f):
            raise ValueError("sigma2_f must be two positive variances")
        if len(self.k) != 2 or any(int(kk) < 1 for kk in self.k):
            raise ValueError("k must be two message lengths >= 1")
        if any(int(kk) > MAX_PAM_BITS for kk in self.k):
            raise ValueError(f"k above {MAX_PAM_BITS} bits is rejected")
        if self.sigma2_fb is not None:
            if len(self.sigma2_fb) != 2 or any(s <= 0 for s in self.sigma2_fb):
                raise ValueError("sigma2_fb must be two positive variances")
        object.__setattr__(self, "sigma2_f", tuple(float(s) for s in self.sigma2_f))
        object.__setattr__(self, "k", tuple(int(kk) for kk in self.k))
        if self.sigma2_fb is not None:
            object.__setattr__(
                self, "sigma2_fb", tuple(float(s) for s in self.sigma2_fb)
            )

    @classmethod
    def symmetric(cls, snr_f_db, n, k, snr_fb_db=None, p=1.0):
        """Symmetric two-user setup from scalar SNRs (equal bits, equal noise)."""
        s2 = snr_db_to_variance(snr_f_db, p)
        fb = None
        if snr_fb_db is not None:
            s2fb = snr_db_to_variance(snr_fb_db, p)
            fb = (s2fb, s2fb)
        return cls(p=p, sigma2_f=(s2, s2), n=n, k=(k, k), sigma2_fb=fb)

    @property
    def noisy_feedback(self):
        return self.sigma2_fb is not None


@dataclass(frozen=True)
class PamConstellation:
    """2^k-point unit-power PAM alphabet, amplitudes in ascending order."""

    k: int
    eta: float
    points: np.ndarray = field(repr=False)

    def nearest_index(self, value):
        """Minimum-distance quantization; ties go to the smaller index."""
        mids = (self.points[:-1] + self.points[1:]) / 2.0
        return np.searchsorted(mids, value, side="left")


def pam_constellation(k):
    if not 1 <= k <= MAX_PAM_BITS:
        raise ValueError(f"pam bits must be in [1, {MAX_PAM_BITS}]")
    eta = math.sqrt(3.0 / (4.0**k - 1.0))
    m = np.arange(2**k, dtype=np.float64)
    points = (2.0 * m - (2**k - 1)) * eta
    return PamConstellation(k=k, eta=eta, points=points)


def bits_to_index(bits):
    """MSB-first natural binary vector -> integer index."""
    idx = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError("bits must be 0/1")
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(index, k):
    """Integer index -> MSB-first natural binary vector of length k."""
    index = int(index)
    if not 0 <= index < 2**k:
        raise ValueError(f"index {index} out of range for {k} bits")
    return [(index >> (k - 1 - j)) & 1 for j in range(k)]


@dataclass
class TrialTranscript:
    """Symbols observed in one trial: transmitted x, per-user received y,
    per-user feedback y_tilde (equal to y under noiseless feedback)."""

    x: np.ndarray
    y: np.ndarray  # (2, n)
    y_tilde: np.ndarray  # (2, n)


_FWD_ROLES = (rng.NOISE_FWD_U1, rng.NOISE_FWD_U2)
_FB_ROLES = (rng.NOISE_FB_U1, rng.NOISE_FB_U2)


def transmit(x, config, trial_rng):
    """Broadcast one symbol: returns (y1, y2) with independent per-user noise."""
    if not math.isfinite(x):
        raise ValueError("transmit requires a finite symbol")
    return tuple(
        x + trial_rng.normal(_FWD_ROLES[u], math.sqrt(config.sigma2_f[u]))
        for u in range(2)
    )


def feed_back(y_u, user, config, trial_rng):
    """Feedback link for one user: identity when noiseless, else adds noise."""
    if config.sigma2_fb is None:
        return y_u
    return y_u + trial_rng.normal(
        _FB_ROLES[user], math.sqrt(config.sigma2_fb[user])
    )


def draw_messages(config, seed, trials):
    """Uniform message indices for both users, one column per user: (T, 2)."""
    return np.stack(
        [
            rng.message_indices(seed, rng.MESSAGE_U1, trials, config.k[0]),
            rng.message_indices(seed, rng.MESSAGE_U2, trials, config.k[1]),
        ],
        axis=1,
    )


def draw_noise(config, seed, trials):
    """All channel noise for a batch of trials.

    Returns (z_fwd, z_fb): z_fwd is (2, T, n); z_fb is (2, T, n) or None for
    noiseless feedback. Values depend only on (seed, trial, role, round).
    """
    t = np.asarray(trials)
    z_fwd = np.stack(
        [
            rng.normals(seed, _FWD_ROLES[u], t, config.n, math.sqrt(config.sigma2_f[u]))
            for u in range(2)
        ]
    )
    z_fb = None
    if config.sigma2_fb is not None:
        z_fb = np.stack(
            [
                rng.normals(
                    seed, _FB_ROLES[u], t, config.n, math.sqrt(config.sigma2_fb[u])
                )
                for u in range(2)
            ]
        )
    return z_fwd, z_fb
