"""Monte-Carlo BLER estimation: experiment descriptions, parallel trial
execution with per-trial substreams, Wilson confidence intervals, and
CSV/JSON emission.

Trials are split into fixed-size chunks whose randomness depends only on
(seed, trial id), so error counts are identical for any worker count.
"""

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytical as an
from . import channel as ch
from . import moments as mo
from . import neural as ne
from . import weights as wt

SCHEMES = ("ol", "eol", "neural", "td")

CHUNK = 65536  # fixed so chunking never depends on the worker count

_Z95 = 1.959963984540054

CSV_COLUMNS = [
    "scheme", "k1", "k2", "n", "rate", "snr_f_db", "snr_fb_db_or_inf",
    "trials", "bler_u1", "ci_u1_lo", "ci_u1_hi", "bler_u2", "ci_u2_lo",
    "ci_u2_hi", "bler_joint", "seed", "wall_time_s",
]


@dataclass(frozen=True)
class Experiment:
    scheme: str
    config: ch.ChannelConfig
    trials: int
    seed: int
    g: float = 1.0
    weights_path: str | None = None
    snr_f_db: float | None = None  # echoes the authored value when known
    snr_fb_db: float | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.scheme == "neural" and not self.weights_path:
            raise ValueError("neural scheme requires a weights path")
        if self.scheme == "td" and self.config.n % 2 != 0:
            raise ValueError("time-division mode requires an even n")


@dataclass
class BlerReport:
    scheme: str
    k: tuple
    n: int
    snr_f_db: float
    snr_fb_db: float | None  # None = noiseless feedback
    trials: int
    block_errors: tuple
    bler: tuple
    bler_joint: float
    ci: tuple  # ((lo1, hi1), (lo2, hi2))
    ci_joint: tuple
    seed: int
    wall_time_s: float
    g: float = 1.0
    weights_path: str | None = None

    @property
    def rate(self):
        return (self.k[0] + self.k[1]) / (2.0 * self.n)

    def stderr(self, user):
        p = self.bler[user]
        return math.sqrt(max(p * (1.0 - p), 1e-300) / self.trials)


def wilson_interval(k, n, z=_Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= k <= n:
        raise ValueError("k must be in [0, n]")
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


def resolve_workers(workers=None):
    cap = os.environ.get("GBCF_THREADS")
    cap = int(cap) if cap else None
    if workers is None:
        workers = cap or 1
    if cap is not None:
        workers = min(workers, cap)
    return max(1, workers)


def _chunk_ranges(trials):
    return [(lo, min(lo + CHUNK, trials)) for lo in range(0, trials, CHUNK)]


def _runner(exp):
    if exp.scheme == "neural":
        w = wt.load_weights(exp.weights_path)
        return lambda lo, hi: ne.run_neural_batch(exp.config, w, exp.seed, lo, hi)
    params = mo.OlParams(g=exp.g)
    if exp.scheme == "td":
        return lambda lo, hi: an.run_td_batch(exp.config, params, exp.seed, lo, hi)
    return lambda lo, hi: an.run_batch(exp.scheme, exp.config, params, exp.seed, lo, hi)


def _snr_fields(exp):
    cfg = exp.config
    f = exp.snr_f_db
    if f is None:
        f = ch.variance_to_snr_db(cfg.sigma2_f[0], cfg.p)
    fb = exp.snr_fb_db
    if fb is None and cfg.sigma2_fb is not None:
        fb = ch.variance_to_snr_db(cfg.sigma2_fb[0], cfg.p)
    return f, fb


MIN_ERRORS_CAP = 200  # extension chunks allowed beyond the fixed budget


def estimate_bler(exp, workers=None, min_errors=None):
    """Run the experiment's trials and report per-user and joint BLER with
    95% Wilson intervals. A block error is any bit mismatch in the decoded
    message.

    min_errors extends the run chunk by chunk until both users have seen
    that many block errors (or a hard cap); extended runs trade the fixed
    trial budget, and therefore seed reproducibility of the trial count,
    for bounded relative error.
    """
    workers = resolve_workers(workers)
    run = _runner(exp)
    ranges = _chunk_ranges(exp.trials)
    t_start = time.perf_counter()
    errors = np.zeros(2, dtype=np.int64)
    if workers == 1:
        for lo, hi in ranges:
            errors += run(lo, hi).errors
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(lambda r: run(*r), ranges):
                errors += res.errors
    trials_done = exp.trials
    if min_errors is not None:
        extra = 0
        while errors.min() < min_errors and extra < MIN_ERRORS_CAP:
            res = run(trials_done, trials_done + CHUNK)
            errors += res.errors
            trials_done += CHUNK
            extra += 1
    wall = time.perf_counter() - t_start
    bler = tuple(errors[u] / trials_done for u in range(2))
    snr_f, snr_fb = _snr_fields(exp)
    return BlerReport(
        scheme=exp.scheme,
        k=exp.config.k,
        n=exp.config.n,
        snr_f_db=snr_f,
        snr_fb_db=snr_fb,
        trials=trials_done,
        block_errors=tuple(int(e) for e in errors),
        bler=bler,
        bler_joint=(bler[0] + bler[1]) / 2.0,
        ci=tuple(wilson_interval(int(errors[u]), trials_done) for u in range(2)),
        ci_joint=wilson_interval(int(errors.sum()), 2 * trials_done),
        seed=exp.seed,
        wall_time_s=wall,
        g=exp.g,
        weights_path=exp.weights_path,
    )


def td_baseline(exp, workers=None):
    """Time-division baseline (analytical single-user refinement per slot)."""
    if exp.config.n % 2 != 0:
        raise ValueError("time-division mode requires an even n")
    if exp.scheme != "td":
        exp = Experiment(
            scheme="td", config=exp.config, trials=exp.trials, seed=exp.seed,
            g=exp.g, snr_f_db=exp.snr_f_db, snr_fb_db=exp.snr_fb_db,
        )
    return estimate_bler(exp, workers)


def sweep(exp, snr_f_grid, snr_fb_grid=None, workers=None):
    """One report per grid point, in grid order. When snr_fb_grid is given,
    the sweep is over the product grid (forward outer, feedback inner)."""
    if len(snr_f_grid) == 0:
        raise ValueError("snr_f_grid must be non-empty")
    if snr_fb_grid is not None and len(snr_fb_grid) == 0:
        raise ValueError("snr_fb_grid must be non-empty when given")
    reports = []
    for snr_f in snr_f_grid:
        for snr_fb in snr_fb_grid if snr_fb_grid is not None else [None]:
            cfg = ch.ChannelConfig(
                p=exp.config.p,
                sigma2_f=(
                    ch.snr_db_to_variance(snr_f, exp.config.p),
                ) * 2,
                n=exp.config.n,
                k=exp.config.k,
                sigma2_fb=None
                if snr_fb is None
                else (ch.snr_db_to_variance(snr_fb, exp.config.p),) * 2,
            )
            point = Experiment(
                scheme=exp.scheme, config=cfg, trials=exp.trials, seed=exp.seed,
                g=exp.g, weights_path=exp.weights_path,
                snr_f_db=float(snr_f),
                snr_fb_db=None if snr_fb is None else float(snr_fb),
            )
            reports.append(estimate_bler(point, workers))
    return reports


def _fmt(v):
    return repr(float(v))


def _row(r, timing):
    return [
        r.scheme, str(r.k[0]), str(r.k[1]), str(r.n), _fmt(r.rate),
        _fmt(r.snr_f_db),
        "inf" if r.snr_fb_db is None else _fmt(r.snr_fb_db),
        str(r.trials), _fmt(r.bler[0]), _fmt(r.ci[0][0]), _fmt(r.ci[0][1]),
        _fmt(r.bler[1]), _fmt(r.ci[1][0]), _fmt(r.ci[1][1]),
        _fmt(r.bler_joint), str(r.seed),
        _fmt(r.wall_time_s if timing else 0.0),
    ]


def report_dict(r, timing=True):
    return {
        "scheme": r.scheme,
        "k1": r.k[0],
        "k2": r.k[1],
        "n": r.n,
        "rate": r.rate,
        "snr_f_db": r.snr_f_db,
        "snr_fb_db_or_inf": "inf" if r.snr_fb_db is None else r.snr_fb_db,
        "trials": r.trials,
        "block_errors": list(r.block_errors),
        "bler_u1": r.bler[0],
        "ci_u1_lo": r.ci[0][0],
        "ci_u1_hi": r.ci[0][1],
        "bler_u2": r.bler[1],
        "ci_u2_lo": r.ci[1][0],
        "ci_u2_hi": r.ci[1][1],
        "bler_joint": r.bler_joint,
        "ci_joint_lo": r.ci_joint[0],
        "ci_joint_hi": r.ci_joint[1],
        "seed": r.seed,
        "wall_time_s": r.wall_time_s if timing else 0.0,
    }


def emit(reports, fmt, path, timing=True):
    """Write reports to path as CSV or JSON with full float precision.

    timing=False zeroes the wall-time column, which is the only
    non-deterministic field, so identical experiments produce identical
    bytes.
    """
    if fmt not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(CSV_COLUMNS)
                for r in reports:
                    writer.writerow(_row(r, timing))
        else:
            with open(path, "w") as f:
                json.dump([report_dict(r, timing) for r in reports], f, indent=1)
                f.write("\n")
    except OSError as e:
        raise OSError(f"cannot write report to {path!r}: {e}") from e
