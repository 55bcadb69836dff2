"""Deterministic, seedable random-variate substrate.

Built on numpy's counter-based Philox generator keyed by (seed, stream_id),
so distinct stream ids give statistically independent streams and the same
pair reproduces the same sequence on every run and platform. Only the raw
uniform stream is taken from numpy; gamma and Poisson variates are generated
by the algorithms in this module (Marsaglia-Tsang for gamma, inversion below
mean 10 and Hoermann's transformed rejection above). Normal deviates come
from Box-Muller over the uniform stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import gammaln

from .errors import ParameterError

_MASK64 = (1 << 64) - 1
# Poisson sampler switches from inversion to transformed rejection here.
_POISSON_SWITCH_MEAN = 10.0


def mix_stream(stream_id: int, key: int) -> int:
    """Derive a child stream id from (stream_id, key) with a splitmix64-style mixer.

    Pure 64-bit integer arithmetic, so the derivation is platform independent.
    Used for hierarchical substreams: bootstrap replicate b, simulation
    replicate s of cell c, and so on.
    """
    x = (stream_id + 0x9E3779B97F4A7C15 * (key + 1)) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass
class RngState:
    """Explicit generator state: a (seed, stream_id) pair over Philox.

    Sampling functions take the state and advance it in place; callers that
    need independent parallel streams derive them with substream(). Two
    states constructed from the same pair yield bitwise-identical sequences.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64)
        self._gen = Generator(Philox(key=key))

    def substream(self, key: int) -> "RngState":
        """Independent child state for work unit `key` (e.g. bootstrap replicate b)."""
        return RngState(self.seed, mix_stream(self.stream_id, key))

    def uniform(self, size=None) -> np.ndarray | float:
        """Uniforms in [0, 1) straight off the Philox bit stream."""
        return self._gen.random(size)

    def _normals(self, m: int) -> np.ndarray:
        # Box-Muller, cosine branch only: two uniforms per deviate, no rejection.
        u1 = self._gen.random(m)
        u2 = self._gen.random(m)
        u1 = np.maximum(u1, 1e-300)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution in shape/rate form: mean shape/rate, variance shape/rate^2."""

    shape: float
    rate: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.shape) and self.shape > 0.0):
            raise ParameterError(f"gamma shape must be finite and > 0, got {self.shape}")
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise ParameterError(f"gamma rate must be finite and > 0, got {self.rate}")


def gamma_fill(state: RngState, shape: np.ndarray, rate: np.ndarray) -> np.ndarray:
    """Vector of gamma(shape_i, rate_i) variates, Marsaglia-Tsang squeeze method.

    Shapes below 1 use the boost x(a+1) * u^(1/a). Element order is stable:
    rejection rounds redraw only for still-pending elements, so the output is
    a deterministic function of the state's stream.
    """
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    boost = shape < 1.0
    a = np.where(boost, shape + 1.0, shape)
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty_like(d)
    pending = np.ones(d.shape, dtype=bool)
    while pending.any():
        idx = np.nonzero(pending)[0]
        x = state._normals(idx.size)
        v = (1.0 + c[idx] * x) ** 3
        u = state._gen.random(idx.size)
        pos = v > 0.0
        vsafe = np.where(pos, v, 1.0)
        ok = pos & (
            (u < 1.0 - 0.0331 * x**4)
            | (np.log(np.maximum(u, 1e-300)) < 0.5 * x * x + d[idx] * (1.0 - v + np.log(vsafe)))
        )
        acc = idx[ok]
        out[acc] = d[acc] * v[ok]
        pending[acc] = False
    if boost.any():
        u = state._gen.random(int(boost.sum()))
        with np.errstate(under="ignore"):
            out[boost] *= u ** (1.0 / shape[boost])
    return out / rate


def gamma_sample(state: RngState, params: GammaParams, size: int | None = None):
    """One gamma variate (or `size` of them) under the given shape/rate params."""
    m = 1 if size is None else int(size)
    draws = gamma_fill(state, np.full(m, params.shape), np.full(m, params.rate))
    return float(draws[0]) if size is None else draws


def _poisson_inversion(state: RngState, mean: np.ndarray) -> np.ndarray:
    # Sequential search through the CDF; one uniform per variate. The cap
    # guards against a uniform landing beyond the float-saturated CDF tail.
    u = state._gen.random(mean.shape)
    p = np.exp(-mean)
    cdf = p.copy()
    k = np.zeros(mean.shape, dtype=np.int64)
    active = u > cdf
    cap = int(mean.max() + 40.0 * math.sqrt(mean.max()) + 30.0)
    while active.any() and k.max() < cap:
        k = np.where(active, k + 1, k)
        p = np.where(active, p * mean / np.maximum(k, 1), p)
        cdf = np.where(active, cdf + p, cdf)
        active = u > cdf
    return k


def _poisson_ptrs(state: RngState, mean: np.ndarray) -> np.ndarray:
    # Hoermann (1993) transformed rejection, valid for mean >= 10.
    b = 0.931 + 2.53 * np.sqrt(mean)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_mean = np.log(mean)
    out = np.empty(mean.shape, dtype=np.int64)
    pending = np.ones(mean.shape, dtype=bool)
    while pending.any():
        idx = np.nonzero(pending)[0]
        u = state._gen.random(idx.size) - 0.5
        v = state._gen.random(idx.size)
        us = 0.5 - np.abs(u)
        kf = np.floor((2.0 * a[idx] / us + b[idx]) * u + mean[idx] + 0.43)
        quick = (us >= 0.07) & (v <= v_r[idx])
        reject = (kf < 0.0) | ((us < 0.013) & (v > us))
        lhs = np.log(v * inv_alpha[idx] / (a[idx] / (us * us) + b[idx]))
        rhs = -mean[idx] + kf * log_mean[idx] - gammaln(kf + 1.0)
        ok = quick | (~reject & (lhs <= rhs))
        acc = idx[ok]
        out[acc] = kf[ok].astype(np.int64)
        pending[acc] = False
    return out


def poisson_fill(state: RngState, mean: np.ndarray) -> np.ndarray:
    """Vector of Poisson(mean_i) counts; exact law for every mean >= 0."""
    mean = np.asarray(mean, dtype=float)
    if mean.ndim != 1:
        mean = mean.ravel()
    if not np.all(np.isfinite(mean)) or np.any(mean < 0.0):
        raise ParameterError("poisson mean must be finite and >= 0")
    out = np.zeros(mean.shape, dtype=np.int64)
    small = (mean > 0.0) & (mean < _POISSON_SWITCH_MEAN)
    large = mean >= _POISSON_SWITCH_MEAN
    # Fixed branch order (small first) keeps the draw sequence deterministic.
    if small.any():
        out[small] = _poisson_inversion(state, mean[small])
    if large.any():
        out[large] = _poisson_ptrs(state, mean[large])
    return out


def poisson_sample(state: RngState, mean: float, size: int | None = None):
    """One Poisson count (or `size` of them) with the given mean."""
    if not (isinstance(mean, (int, float)) and math.isfinite(mean)) or mean < 0.0:
        raise ParameterError(f"poisson mean must be finite and >= 0, got {mean}")
    m = 1 if size is None else int(size)
    draws = poisson_fill(state, np.full(m, float(mean)))
    return int(draws[0]) if size is None else draws
