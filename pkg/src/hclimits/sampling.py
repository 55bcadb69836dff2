"""Sampling of overdispersed count data via gamma-Poisson mixtures.

Two generators: the quasi-Poisson model (variance phi * n_h * lambda, valid
for phi > 1) and the negative-binomial model (variance
n_h * lambda * (1 + kappa * n_h * lambda)). Both draw a per-cluster gamma
mean and then a Poisson count from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .rng import RngState, gamma_fill, poisson_fill


@dataclass(frozen=True)
class DesignSpec:
    """The historical design: one positive offset per cluster."""

    offsets: np.ndarray = field()

    def __post_init__(self) -> None:
        arr = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if arr.size < 1:
            raise ParameterError("design needs at least one cluster")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise ParameterError("all offsets must be finite and > 0")
        object.__setattr__(self, "offsets", arr)

    @property
    def n_clusters(self) -> int:
        return int(self.offsets.size)

    @property
    def n_bar(self) -> float:
        return float(self.offsets.mean())


@dataclass(frozen=True)
class QuasiPoissonParams:
    """Rate per offset unit and multiplicative dispersion, strictly > 1."""

    lam: float
    phi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lam) and self.lam > 0.0):
            raise ParameterError(f"lambda must be finite and > 0, got {self.lam}")
        if not (math.isfinite(self.phi) and self.phi > 1.0):
            raise ParameterError(
                f"quasi-Poisson sampling requires phi > 1, got {self.phi} "
                "(clamping policy lives with the caller)"
            )


@dataclass(frozen=True)
class NegBinParams:
    """Rate per offset unit and quadratic dispersion kappa > 0."""

    lam: float
    kappa: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lam) and self.lam > 0.0):
            raise ParameterError(f"lambda must be finite and > 0, got {self.lam}")
        if not (math.isfinite(self.kappa) and self.kappa > 0.0):
            raise ParameterError(f"kappa must be finite and > 0, got {self.kappa}")


def sample_quasi_poisson(
    state: RngState, design: DesignSpec, params: QuasiPoissonParams
) -> np.ndarray:
    """Counts with E(Y_h) = n_h*lambda and var(Y_h) = phi*n_h*lambda.

    Per cluster: kappa_h = (phi-1)/(n_h*lambda), then a gamma mean with
    shape 1/kappa_h and rate 1/(kappa_h*n_h*lambda), then a Poisson draw.
    """
    mu = design.offsets * params.lam
    kappa_h = (params.phi - 1.0) / mu
    shape = 1.0 / kappa_h
    rate = 1.0 / (kappa_h * mu)
    means = gamma_fill(state, shape, rate)
    return poisson_fill(state, means)


def sample_neg_binomial(
    state: RngState, design: DesignSpec, params: NegBinParams
) -> np.ndarray:
    """Counts with E(Y_h) = n_h*lambda and var(Y_h) = n_h*lambda*(1+kappa*n_h*lambda).

    Shared gamma shape 1/kappa across clusters; rate 1/(kappa*n_h*lambda).
    """
    mu = design.offsets * params.lam
    shape = np.full(mu.shape, 1.0 / params.kappa)
    rate = 1.0 / (params.kappa * mu)
    means = gamma_fill(state, shape, rate)
    return poisson_fill(state, means)


def sample_uniform_offsets(state: RngState, n_clusters: int, lo: float, hi: float) -> DesignSpec:
    """Design with n_clusters offsets drawn independently from Uniform(lo, hi)."""
    if n_clusters < 1:
        raise ParameterError("n_clusters must be >= 1")
    if not (math.isfinite(lo) and math.isfinite(hi)) or not (0.0 < lo < hi):
        raise ParameterError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    u = state.uniform(n_clusters)
    return DesignSpec(lo + (hi - lo) * u)
