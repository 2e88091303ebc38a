"""Counter-based random numbers.

Every random quantity in the package is a pure function of a 64-bit key and
one or two integer counters, so any sub-stream can be regenerated without
replaying the others. The mixer is the SplitMix64 finalizer.

Keys are derived from ``(master seed, stream id, tag)``. Tags split one
replica's randomness into independent sub-streams (environment, walk noise,
branching trials, Brownian increments).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

MASK64 = (1 << 64) - 1

TAG_ENV = 1
TAG_NOISE = 2
TAG_BRANCH = 3
TAG_LEFT = 4
TAG_BM = 5
TAG_SUBORD = 6
TAG_SYNTH = 7

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xD1B54A32D192ED03)
_C2 = np.uint64(0xABC98388FB8FAC03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(inline="always", cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def derive_key(master, stream, tag):
    z = mix64(np.uint64(master) ^ _GOLDEN)
    z = mix64(z + np.uint64(stream) * _C1)
    return mix64(z ^ (np.uint64(tag) * _C2))


@nb.njit(inline="always", cache=True)
def draw(key, a, b):
    """64 random bits addressed by ``(key, a, b)``."""
    z = mix64(np.uint64(key) + np.uint64(a) * _C1)
    return mix64(z ^ (np.uint64(b) * _C2))


@nb.njit(inline="always", cache=True)
def to_unit(h):
    """Map 64 bits to a double in [0, 1) using the top 53 bits."""
    return (h >> _S11) * _INV53


@nb.njit(inline="always", cache=True)
def uniform_at(key, a, b):
    return to_unit(draw(key, a, b))


# Sequential streams: ``ctr`` is a length-1 uint64 array advanced in place.

@nb.njit(inline="always", cache=True)
def next_bits(key, ctr):
    h = draw(key, ctr[0], 0)
    ctr[0] += np.uint64(1)
    return h


@nb.njit(inline="always", cache=True)
def next_uniform(key, ctr):
    return to_unit(next_bits(key, ctr))


@nb.njit(cache=True)
def next_normal(key, ctr):
    # Box-Muller, one variate per pair; 1 - u keeps the log finite.
    u1 = 1.0 - next_uniform(key, ctr)
    u2 = next_uniform(key, ctr)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@nb.njit(cache=True)
def next_gamma(key, ctr, shape):
    """Gamma(shape, 1) for shape >= 1 (Marsaglia-Tsang)."""
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = next_normal(key, ctr)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = 1.0 - next_uniform(key, ctr)
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


@nb.njit(cache=True)
def next_poisson(key, ctr, lam):
    if lam <= 0.0:
        return 0
    if lam < 10.0:
        # sequential inversion
        u = next_uniform(key, ctr)
        k = 0
        p = math.exp(-lam)
        cdf = p
        while u >= cdf:
            k += 1
            p *= lam / k
            cdf += p
            if p == 0.0 and cdf < u:
                # underflow guard far in the tail; restart
                u = next_uniform(key, ctr)
                k = 0
                p = math.exp(-lam)
                cdf = p
        return k
    # PTRS transformed rejection (Hormann 1993)
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = next_uniform(key, ctr) - 0.5
        v = next_uniform(key, ctr)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return np.int64(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1.0)):
            return np.int64(k)


@nb.njit(cache=True)
def next_fair_failures(key, ctr, r):
    """Failures before the r-th success in fair Bernoulli trials.

    Negative binomial NB(r, 1/2). Small r consumes raw bits; large r uses
    the gamma-Poisson mixture.
    """
    if r <= 0:
        return np.int64(0)
    if r <= 16:
        fails = np.int64(0)
        succ = 0
        while True:
            bits = next_bits(key, ctr)
            for _ in range(64):
                if bits & np.uint64(1):
                    succ += 1
                    if succ == r:
                        return fails
                else:
                    fails += 1
                bits = bits >> np.uint64(1)
    lam = next_gamma(key, ctr, float(r))
    return next_poisson(key, ctr, lam)


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus replica stream id."""

    master: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.master <= MASK64:
            raise ValueError(f"master seed must fit in 64 bits, got {self.master}")
        if self.stream < 0:
            raise ValueError(f"stream id must be nonnegative, got {self.stream}")

    def key(self, tag: int) -> np.uint64:
        return np.uint64(derive_key(np.uint64(self.master), np.uint64(self.stream), np.uint64(tag)))

    def with_stream(self, stream: int) -> "SeedSpec":
        return SeedSpec(self.master, stream)


def fan_out(master: int, replicas: int) -> list[SeedSpec]:
    """Seeds for ``replicas`` independent runs: stream ids 0..replicas-1."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    return [SeedSpec(master, i) for i in range(replicas)]


def stream_keys(master: int, streams, tag: int) -> np.ndarray:
    """Vector of derived keys, one per stream id."""
    streams = np.asarray(streams, dtype=np.uint64)
    return _stream_keys(np.uint64(master), streams, np.uint64(tag))


@nb.njit(cache=True)
def _stream_keys(master, streams, tag):
    out = np.empty(streams.shape[0], dtype=np.uint64)
    for i in range(streams.shape[0]):
        out[i] = derive_key(master, streams[i], tag)
    return out


def standard_normals(master: int, stream: int, tag: int, size: int) -> np.ndarray:
    """``size`` standard normals from the sequential stream (master, stream, tag)."""
    key = np.uint64(derive_key(np.uint64(master), np.uint64(stream), np.uint64(tag)))
    return _normals(key, size)


@nb.njit(cache=True)
def _normals(key, size):
    ctr = np.zeros(1, dtype=np.uint64)
    out = np.empty(size)
    for i in range(size):
        out[i] = next_normal(key, ctr)
    return out


def uniforms(master: int, stream: int, tag: int, size: int) -> np.ndarray:
    """``size`` uniforms on [0, 1) from the sequential stream (master, stream, tag)."""
    key = np.uint64(derive_key(np.uint64(master), np.uint64(stream), np.uint64(tag)))
    return _uniforms(key, size)


@nb.njit(cache=True)
def _uniforms(key, size):
    ctr = np.zeros(1, dtype=np.uint64)
    out = np.empty(size)
    for i in range(size):
        out[i] = next_uniform(key, ctr)
    return out
