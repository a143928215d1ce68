"""Randomized vector compression with a bounded relative-error contract.

Every operator Q here satisfies E||Q(x) - x||^2 <= omega^2 ||x||^2 with
omega in [0, 1): keeping everything (identity), keeping k random or k
largest-magnitude coordinates, or stochastic norm-scaled rounding to
2^(k-1) - 1 levels plus a sign bit.

All randomness comes from a per-instance uniform(0,1) stream seeded at
construction, so identical seeds reproduce identical output sequences.
A zero-norm rounding call still consumes its d draws; that keeps the
streams of a bank of agents aligned round by round. Single-vector and
row-wise paths share the same kernels, so a CompressorBank is
bit-identical to n standalone instances with the same seeds.
"""

from __future__ import annotations

import math
import re

import numpy as np

__all__ = [
    "Compressor",
    "CompressorBank",
    "CompressionError",
    "UniformStream",
    "make_compressor",
    "parse_compressor_spec",
]

KINDS = ("identity", "rand_k", "top_k", "qsgd_k")

VALUE_BITS = 32  # bits per transmitted raw coordinate or norm

_SPEC_RE = re.compile(r"^(identity|rand|top|qsgd)(?:_(\d+))?$")


class CompressionError(ValueError):
    """Invalid compressor configuration or input."""


class UniformStream:
    """Block-buffered uniform(0,1) doubles from a seeded PCG64 generator.

    The stream is defined as the concatenation of the generator's
    uniform doubles, independent of how take() calls are sized.
    """

    def __init__(self, seed: int, block: int = 8192):
        self._gen = np.random.default_rng(seed)
        self._block = block
        self._buf = np.empty(0)
        self._pos = 0

    def take(self, m: int) -> np.ndarray:
        if self._pos + m <= self._buf.size:
            out = self._buf[self._pos : self._pos + m]
            self._pos += m
            return out
        head = self._buf[self._pos :]
        need = m - head.size
        self._buf = self._gen.random(max(self._block, need))
        self._pos = need
        if head.size == 0:
            return self._buf[:need]
        return np.concatenate([head, self._buf[:need]])


def parse_compressor_spec(spec: str) -> tuple[str, int]:
    """Parse "identity", "rand_<k>", "top_<k>", "qsgd_<k>" into (kind, k)."""
    m = _SPEC_RE.match(spec.strip())
    if not m:
        raise CompressionError(f"unrecognized compressor spec {spec!r}")
    base, kstr = m.groups()
    if base == "identity":
        if kstr is not None:
            raise CompressionError("identity takes no parameter")
        return "identity", 0
    if kstr is None:
        raise CompressionError(f"{base!r} needs an integer parameter, e.g. {base}_5")
    return base + "_k", int(kstr)


def _validate(kind: str, k: int, d: int) -> None:
    if d < 1:
        raise CompressionError(f"dimension must be >= 1, got {d}")
    if kind not in KINDS:
        raise CompressionError(f"unknown compressor kind {kind!r}")
    if kind in ("rand_k", "top_k") and not (1 <= k <= d):
        raise CompressionError(f"{kind} needs 1 <= k <= d, got k={k}, d={d}")
    if kind == "qsgd_k" and k < 2:
        raise CompressionError(f"qsgd_k needs k >= 2 (one level bit plus sign), got k={k}")


def _omega_squared(kind: str, k: int, d: int) -> float:
    if kind == "identity":
        return 0.0
    if kind in ("rand_k", "top_k"):
        return 1.0 - k / d
    u = 2 ** (k - 1) - 1
    tau = 1.0 + min(d / u**2, math.sqrt(d) / u)
    return 1.0 - 1.0 / tau


def _message_bits(kind: str, k: int, d: int) -> int:
    if kind == "identity":
        return VALUE_BITS * d
    if kind in ("rand_k", "top_k"):
        index_bits = math.ceil(math.log2(d)) if d > 1 else 0
        return k * (VALUE_BITS + index_bits)
    return d * k + VALUE_BITS


def _top_k_rows(x: np.ndarray, k: int) -> np.ndarray:
    # stable sort so equal magnitudes resolve to the lowest index
    keep = np.argsort(-np.abs(x), axis=1, kind="stable")[:, :k]
    rows = np.arange(x.shape[0])[:, None]
    out = np.zeros_like(x)
    out[rows, keep] = x[rows, keep]
    return out


def _rand_k_rows(x: np.ndarray, u: np.ndarray, k: int) -> np.ndarray:
    """Keep a uniform k-subset per row, chosen by partial Fisher-Yates."""
    n, d = x.shape
    idx = np.tile(np.arange(d), (n, 1))
    rows = np.arange(n)
    for j in range(k):
        r = j + (u[:, j] * (d - j)).astype(np.int64)
        tmp = idx[rows, r].copy()
        idx[rows, r] = idx[rows, j]
        idx[rows, j] = tmp
    keep = idx[:, :k]
    out = np.zeros_like(x)
    out[rows[:, None], keep] = x[rows[:, None], keep]
    return out


def _qsgd_rows(x: np.ndarray, zeta: np.ndarray, levels: int, tau: float) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    safe = norms > 0.0
    lv = np.abs(x)
    lv *= levels
    np.divide(lv, norms[:, None], out=lv, where=safe[:, None])
    lv += zeta
    np.floor(lv, out=lv)
    np.minimum(lv, levels, out=lv)  # guard fp overshoot when |x_i| ~ ||x||
    out = np.sign(x)
    out *= norms[:, None] / (levels * tau)
    out *= lv
    out[~safe] = 0.0
    return out


class Compressor:
    """A configured operator with its own seeded randomness.

    Single-owner: the internal stream is mutable, so one instance must
    not be shared between agents. The relative-error parameter omega is
    strictly below 1 for every accepted configuration.
    """

    def __init__(self, kind: str, k: int, d: int, seed: int = 0):
        _validate(kind, k, d)
        self.kind = kind
        self.k = int(k)
        self.d = int(d)
        self._stream = UniformStream(seed)
        self._omega2 = _omega_squared(kind, k, d)
        if not (0.0 <= self._omega2 < 1.0):
            raise CompressionError(
                f"configuration {kind} k={k} d={d} has omega^2={self._omega2}, outside [0, 1)"
            )
        if kind == "qsgd_k":
            self._levels = 2 ** (k - 1) - 1
            self._tau = 1.0 + min(d / self._levels**2, math.sqrt(d) / self._levels)

    @property
    def spec(self) -> str:
        if self.kind == "identity":
            return "identity"
        return f"{self.kind[:-2]}_{self.k}"

    def omega(self) -> float:
        """Contract parameter: E||Q(x) - x||^2 <= omega^2 ||x||^2."""
        return math.sqrt(self._omega2)

    def omega_squared(self) -> float:
        return self._omega2

    def message_bits(self) -> int:
        """Bits per transmitted compressed vector.

        Accounting model: raw coordinates and the norm cost 32 bits
        each; sparsifiers send k values plus k indices of ceil(log2 d)
        bits; the quantizer sends k bits per coordinate plus one norm.
        """
        return _message_bits(self.kind, self.k, self.d)

    def compress(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise CompressionError(f"expected vector of length {self.d}, got shape {x.shape}")
        if self.kind == "identity":
            return x.copy()
        if self.kind == "top_k":
            return _top_k_rows(x[None, :], self.k)[0]
        if self.kind == "rand_k":
            u = self._stream.take(self.k)
            return _rand_k_rows(x[None, :], u[None, :], self.k)[0]
        # qsgd: draw before the norm guard so zero vectors keep streams aligned
        zeta = self._stream.take(self.d)
        return _qsgd_rows(x[None, :], zeta[None, :], self._levels, self._tau)[0]


def make_compressor(spec: str, d: int, seed: int = 0) -> Compressor:
    kind, k = parse_compressor_spec(spec)
    return Compressor(kind, k, d, seed)


class _AgentStreams:
    """Chunked per-agent uniform draws: one (n, m) matrix per round.

    Agent i's row sequence equals UniformStream(seeds[i]).take(m) called
    once per round, because PCG64 uniform doubles concatenate across
    differently sized requests.
    """

    def __init__(self, seeds: list[int], m: int, chunk: int | None = None):
        self._gens = [np.random.default_rng(s) for s in seeds]
        self._m = m
        if chunk is None:
            chunk = max(1, min(256, 2_000_000 // max(1, len(seeds) * m)))
        self._chunk = chunk
        self._buf: np.ndarray | None = None
        self._cursor = chunk

    def next_matrix(self) -> np.ndarray:
        if self._cursor >= self._chunk:
            self._buf = np.stack(
                [g.random(self._chunk * self._m).reshape(self._chunk, self._m) for g in self._gens]
            )
            self._cursor = 0
        out = self._buf[:, self._cursor, :]
        self._cursor += 1
        return out


class CompressorBank:
    """Row-wise compression for n agents, one independent stream each.

    compress_rows(X) applies agent i's operator to row i, producing the
    same numbers as n standalone Compressor instances seeded with
    seeds[i], with the randomness generated in chunks.
    """

    def __init__(self, kind: str, k: int, d: int, seeds: list[int]):
        _validate(kind, k, d)
        self.kind = kind
        self.k = int(k)
        self.d = int(d)
        self.n = len(seeds)
        self.omega = math.sqrt(_omega_squared(kind, k, d))
        self.bits_per_message = _message_bits(kind, k, d)
        if kind == "qsgd_k":
            self._streams = _AgentStreams(seeds, d)
            self._levels = 2 ** (k - 1) - 1
            self._tau = 1.0 + min(d / self._levels**2, math.sqrt(d) / self._levels)
        elif kind == "rand_k":
            self._streams = _AgentStreams(seeds, k)
        else:
            self._streams = None

    @property
    def spec(self) -> str:
        if self.kind == "identity":
            return "identity"
        return f"{self.kind[:-2]}_{self.k}"

    def compress_rows(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.n, self.d):
            raise CompressionError(f"expected shape {(self.n, self.d)}, got {x.shape}")
        if self.kind == "identity":
            return x.copy()
        if self.kind == "top_k":
            return _top_k_rows(x, self.k)
        if self.kind == "rand_k":
            return _rand_k_rows(x, self._streams.next_matrix(), self.k)
        return _qsgd_rows(x, self._streams.next_matrix(), self._levels, self._tau)
