"""Counter-based random substreams for reproducible parallel Monte-Carlo.

Every random value consumed by a trial is addressed by (seed, trial_id, role,
draw_index), so any batching or worker layout produces bit-identical streams.
The generator is Philox4x32-10; numpy ships Philox only as a sequential bit
generator, so the keyed block function is implemented here directly on top of
vectorized uint32 arithmetic.
"""

import numpy as np
from scipy.special import ndtri

# Stream roles. Each role is an independent substream: consuming one role
# never advances another, so e.g. user 1's noise values do not depend on
# whether user 2's were generated at all.
NOISE_FWD_U1 = 0
NOISE_FWD_U2 = 1
NOISE_FB_U1 = 2
NOISE_FB_U2 = 3
MESSAGE_U1 = 4
MESSAGE_U2 = 5

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)

_U32 = np.uint64(0xFFFFFFFF)


def philox4x32(counter, key, rounds=10):
    """Philox4x32 block function.

    counter: (n, 4) uint32, key: (2,) or (n, 2) uint32. Returns (n, 4) uint32.
    """
    c = np.array(counter, dtype=np.uint32, copy=True).reshape(-1, 4)
    key = np.asarray(key, dtype=np.uint32)
    if key.ndim == 1:
        k0 = np.full(c.shape[0], key[0], dtype=np.uint32)
        k1 = np.full(c.shape[0], key[1], dtype=np.uint32)
    else:
        k0 = key[:, 0].copy()
        k1 = key[:, 1].copy()
    for r in range(rounds):
        if r > 0:
            k0 += _W0
            k1 += _W1
        p0 = _M0 * c[:, 0].astype(np.uint64)
        p1 = _M1 * c[:, 2].astype(np.uint64)
        hi0 = (p0 >> np.uint64(32)).astype(np.uint32)
        lo0 = (p0 & _U32).astype(np.uint32)
        hi1 = (p1 >> np.uint64(32)).astype(np.uint32)
        lo1 = (p1 & _U32).astype(np.uint32)
        c[:, 0] = hi1 ^ c[:, 1] ^ k0
        c[:, 1] = lo1
        c[:, 2] = hi0 ^ c[:, 3] ^ k1
        c[:, 3] = lo0
    return c


def _key(seed):
    seed = np.uint64(np.uint64(seed) & np.uint64(0xFFFFFFFFFFFFFFFF))
    return np.array([seed & _U32, seed >> np.uint64(32)], dtype=np.uint32)


def _blocks(seed, role, trials, n_blocks):
    """Raw Philox output words for each (trial, block): shape (T, n_blocks, 4)."""
    trials = np.asarray(trials, dtype=np.uint64)
    t = np.repeat(trials, n_blocks)
    b = np.tile(np.arange(n_blocks, dtype=np.uint32), len(trials))
    ctr = np.empty((len(t), 4), dtype=np.uint32)
    ctr[:, 0] = b
    ctr[:, 1] = np.uint32(role)
    ctr[:, 2] = (t & _U32).astype(np.uint32)
    ctr[:, 3] = (t >> np.uint64(32)).astype(np.uint32)
    out = philox4x32(ctr, _key(seed))
    return out.reshape(len(trials), n_blocks, 4)


def uniforms(seed, role, trials, draws):
    """(T, draws) doubles in the open interval (0, 1), 53-bit resolution.

    Each Philox block yields two doubles; draw j of trial t is a pure function
    of (seed, role, t, j).
    """
    n_blocks = (draws + 1) // 2
    w = _blocks(seed, role, trials, n_blocks).astype(np.uint64)
    hi_a = w[:, :, 0] << np.uint64(21)
    lo_a = w[:, :, 1] >> np.uint64(11)
    hi_b = w[:, :, 2] << np.uint64(21)
    lo_b = w[:, :, 3] >> np.uint64(11)
    u = np.empty((w.shape[0], 2 * n_blocks), dtype=np.float64)
    u[:, 0::2] = ((hi_a | lo_a).astype(np.float64) + 0.5) * 2.0**-53
    u[:, 1::2] = ((hi_b | lo_b).astype(np.float64) + 0.5) * 2.0**-53
    return u[:, :draws]


def normals(seed, role, trials, draws, sigma=1.0):
    """(T, draws) Normal(0, sigma^2) values via the inverse Gaussian CDF."""
    return ndtri(uniforms(seed, role, trials, draws)) * sigma


def message_indices(seed, role, trials, k_bits):
    """(T,) uniform message indices in [0, 2^k). Power-of-two masking is
    bias-free."""
    w = _blocks(seed, role, trials, 1)
    return (w[:, 0, 0] & np.uint32((1 << k_bits) - 1)).astype(np.int64)


class TrialRng:
    """Stateful per-trial view of the substreams for scalar (single-trial)
    code paths. Draw counters advance per role, matching the column layout
    the batch paths use, so scalar and batch runs see identical values."""

    def __init__(self, seed, trial_id):
        self.seed = seed
        self.trial_id = trial_id
        self._next = {}

    def normal(self, role, sigma=1.0):
        i = self._next.get(role, 0)
        self._next[role] = i + 1
        return float(normals(self.seed, role, [self.trial_id], i + 1, sigma)[0, i])

    def message(self, role, k_bits):
        return int(message_indices(self.seed, role, [self.trial_id], k_bits)[0])
