"""Binary weight-file format for the learned codec.

Layout (little-endian throughout):

    magic "GBCF" | u32 version | u32 header_len | header (UTF-8 JSON)
    then named tensors until EOF, each as
    u32 name_len | name (UTF-8) | u32 rank | rank x u64 dims
    | row-major float32 data | u32 CRC32(data)

The JSON header carries d_h, n, k, p, activation id, FE wiring id, the
per-round scales beta, and the frozen per-round power-normalization
statistics. Tensors are float32; the loader rejects anything non-finite,
any checksum or shape mismatch, and any beta vector violating the average
power constraint.
"""

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"GBCF"
VERSION = 1

ACTIVATIONS = {0: "tanh"}
FE_WIRINGS = {0: "residual", 1: "plain"}

PS_EPS = 1e-6  # epsilon inside the power-normalization denominator
LN_EPS = 1e-6  # epsilon inside layer normalization

BETA_POWER_TOL = 1e-6


class WeightFormatError(ValueError):
    """Structured load failure; `tensor` names the offending tensor when
    the problem is tensor-local."""

    def __init__(self, message, tensor=None):
        self.tensor = tensor
        super().__init__(message if tensor is None else f"{message} (tensor {tensor!r})")


@dataclass
class FeParams:
    """One feature extractor: two affine layers plus layer-norm gain/bias."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    ln_g: np.ndarray
    ln_b: np.ndarray


@dataclass
class MlpParams:
    """Two affine layers ending in a scalar (the encoder head)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass
class HeadParams:
    """Single affine layer to the per-index logits (a decoder head)."""

    w: np.ndarray
    b: np.ndarray


@dataclass
class CodecWeights:
    d_h: int
    n: int
    k: tuple
    p: float
    activation: int
    fe_wiring: int
    beta: np.ndarray  # (n,)
    ps_mean: np.ndarray  # (n-2,) rounds 3..n
    ps_var: np.ndarray  # (n-2,)
    fe_enc: FeParams = field(repr=False, default=None)
    mlp_enc: MlpParams = field(repr=False, default=None)
    fe_dec: tuple = field(repr=False, default=None)  # (FeParams, FeParams)
    mlp_dec: tuple = field(repr=False, default=None)  # (HeadParams, HeadParams)
    meta: dict = field(default_factory=dict)

    @property
    def enc_input_dim(self):
        return 3 * (self.n - 1)

    def class_counts(self):
        return tuple(2**kk for kk in self.k)


def _expected_shapes(d_h, n, k):
    enc_in = 3 * (n - 1)
    shapes = {}
    for name, in_dim in (("fe_enc", enc_in), ("fe_dec1", n), ("fe_dec2", n)):
        shapes[f"{name}.w1"] = (d_h, in_dim)
        shapes[f"{name}.b1"] = (d_h,)
        shapes[f"{name}.w2"] = (d_h, d_h)
        shapes[f"{name}.b2"] = (d_h,)
        shapes[f"{name}.ln_g"] = (d_h,)
        shapes[f"{name}.ln_b"] = (d_h,)
    shapes["mlp_enc.w1"] = (d_h, d_h)
    shapes["mlp_enc.b1"] = (d_h,)
    shapes["mlp_enc.w2"] = (1, d_h)
    shapes["mlp_enc.b2"] = (1,)
    for u in (1, 2):
        c = 2 ** k[u - 1]
        shapes[f"mlp_dec{u}.w"] = (c, d_h)
        shapes[f"mlp_dec{u}.b"] = (c,)
    return shapes


def _tensor_dict(w):
    groups = {
        "fe_enc": w.fe_enc,
        "fe_dec1": w.fe_dec[0],
        "fe_dec2": w.fe_dec[1],
    }
    out = {}
    for name, fe in groups.items():
        for f in ("w1", "b1", "w2", "b2", "ln_g", "ln_b"):
            out[f"{name}.{f}"] = getattr(fe, f)
    for f in ("w1", "b1", "w2", "b2"):
        out[f"mlp_enc.{f}"] = getattr(w.mlp_enc, f)
    for u in (1, 2):
        out[f"mlp_dec{u}.w"] = w.mlp_dec[u - 1].w
        out[f"mlp_dec{u}.b"] = w.mlp_dec[u - 1].b
    return out


def validate(w):
    if w.activation not in ACTIVATIONS:
        raise WeightFormatError(f"unknown activation id {w.activation}")
    if w.fe_wiring not in FE_WIRINGS:
        raise WeightFormatError(f"unknown FE wiring id {w.fe_wiring}")
    if w.n < 3:
        raise WeightFormatError("learned codec needs at least one refinement round")
    beta = np.asarray(w.beta, dtype=np.float64)
    mean_sq = float((beta**2).mean())
    if abs(mean_sq - w.p) > BETA_POWER_TOL:
        raise WeightFormatError(
            f"beta violates the average power constraint: mean beta^2 = {mean_sq!r}"
        )
    if len(w.ps_mean) != w.n - 2 or len(w.ps_var) != w.n - 2:
        raise WeightFormatError("power-normalization stats must cover rounds 3..n")
    if not np.isfinite(w.ps_mean).all() or not np.isfinite(w.ps_var).all():
        raise WeightFormatError("power-normalization stats must be finite")
    if (np.asarray(w.ps_var) < 0).any():
        raise WeightFormatError("power-normalization variances must be >= 0")
    shapes = _expected_shapes(w.d_h, w.n, w.k)
    tensors = _tensor_dict(w)
    for name, shape in shapes.items():
        t = tensors[name]
        if t is None:
            raise WeightFormatError("missing tensor", tensor=name)
        if tuple(t.shape) != shape:
            raise WeightFormatError(
                f"shape {tuple(t.shape)} != expected {shape}", tensor=name
            )
        if t.dtype != np.float32:
            raise WeightFormatError("tensor must be float32", tensor=name)
        if not np.isfinite(t).all():
            raise WeightFormatError("tensor contains NaN/Inf", tensor=name)
    return w


def save_weights(w, path):
    validate(w)
    header = {
        "d_h": w.d_h,
        "n": w.n,
        "k": list(w.k),
        "p": w.p,
        "activation": w.activation,
        "fe_wiring": w.fe_wiring,
        "beta": [float(v) for v in np.asarray(w.beta, dtype=np.float32)],
        "ps_mean": [float(v) for v in np.asarray(w.ps_mean, dtype=np.float32)],
        "ps_var": [float(v) for v in np.asarray(w.ps_var, dtype=np.float32)],
    }
    header.update(w.meta)
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    blob += struct.pack("<I", len(hdr))
    blob += hdr
    for name, t in sorted(_tensor_dict(w).items()):
        data = np.ascontiguousarray(t, dtype="<f4").tobytes()
        nb = name.encode("utf-8")
        blob += struct.pack("<I", len(nb))
        blob += nb
        blob += struct.pack("<I", t.ndim)
        blob += struct.pack(f"<{t.ndim}Q", *t.shape)
        blob += data
        blob += struct.pack("<I", zlib.crc32(data) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(bytes(blob))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, nbytes, what, tensor=None):
        if self.pos + nbytes > len(self.buf):
            raise WeightFormatError(f"truncated file while reading {what}", tensor)
        out = self.buf[self.pos : self.pos + nbytes]
        self.pos += nbytes
        return out

    def u32(self, what, tensor=None):
        return struct.unpack("<I", self.take(4, what, tensor))[0]

    @property
    def done(self):
        return self.pos >= len(self.buf)


def load_weights(path):
    with open(path, "rb") as f:
        buf = f.read()
    r = _Reader(buf)
    if r.take(4, "magic") != MAGIC:
        raise WeightFormatError("bad magic; not a codec weight file")
    version = r.u32("version")
    if version != VERSION:
        raise WeightFormatError(f"unsupported version {version}")
    hdr_len = r.u32("header length")
    try:
        header = json.loads(r.take(hdr_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WeightFormatError(f"unreadable header: {e}") from e
    for key in ("d_h", "n", "k", "p", "activation", "fe_wiring", "beta",
                "ps_mean", "ps_var"):
        if key not in header:
            raise WeightFormatError(f"header missing field {key!r}")
    d_h, n, k = int(header["d_h"]), int(header["n"]), tuple(int(v) for v in header["k"])
    expected = _expected_shapes(d_h, n, k)
    tensors = {}
    while not r.done:
        name_len = r.u32("tensor name length")
        name = r.take(name_len, "tensor name").decode("utf-8")
        rank = r.u32("tensor rank", name)
        dims = struct.unpack(f"<{rank}Q", r.take(8 * rank, "tensor dims", name))
        count = int(np.prod(dims)) if rank else 1
        data = r.take(4 * count, "tensor data", name)
        crc = r.u32("tensor checksum", name)
        if zlib.crc32(data) & 0xFFFFFFFF != crc:
            raise WeightFormatError("checksum mismatch", tensor=name)
        if name not in expected:
            raise WeightFormatError("unexpected tensor", tensor=name)
        if name in tensors:
            raise WeightFormatError("duplicate tensor", tensor=name)
        arr = np.frombuffer(data, dtype="<f4").reshape(dims).astype(np.float32)
        tensors[name] = arr
    for name in expected:
        if name not in tensors:
            raise WeightFormatError("missing tensor", tensor=name)

    def fe(prefix):
        return FeParams(*(tensors[f"{prefix}.{f}"] for f in
                          ("w1", "b1", "w2", "b2", "ln_g", "ln_b")))

    known = {"d_h", "n", "k", "p", "activation", "fe_wiring", "beta",
             "ps_mean", "ps_var"}
    w = CodecWeights(
        d_h=d_h,
        n=n,
        k=k,
        p=float(header["p"]),
        activation=int(header["activation"]),
        fe_wiring=int(header["fe_wiring"]),
        beta=np.array(header["beta"], dtype=np.float32),
        ps_mean=np.array(header["ps_mean"], dtype=np.float32),
        ps_var=np.array(header["ps_var"], dtype=np.float32),
        fe_enc=fe("fe_enc"),
        mlp_enc=MlpParams(*(tensors[f"mlp_enc.{f}"] for f in ("w1", "b1", "w2", "b2"))),
        fe_dec=(fe("fe_dec1"), fe("fe_dec2")),
        mlp_dec=(
            HeadParams(tensors["mlp_dec1.w"], tensors["mlp_dec1.b"]),
            HeadParams(tensors["mlp_dec2.w"], tensors["mlp_dec2.b"]),
        ),
        meta={k_: v for k_, v in header.items() if k_ not in known},
    )
    if len(w.beta) != n:
        raise WeightFormatError("beta must have one scale per round")
    return validate(w)
