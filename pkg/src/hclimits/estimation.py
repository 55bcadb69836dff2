"""Intercept-only count GLM fits with log link and offset log(n_h).

The quasi-Poisson fit is closed form: lambda_hat = sum(y)/sum(n) (the MLE of
the intercept-only log-link Poisson GLM with offsets) and the Pearson
dispersion phi_hat = sum((y - n*lambda_hat)^2 / (n*lambda_hat)) / (H-1),
reported raw (it may fall below 1; clamping happens at interval time).

The negative-binomial fit maximizes the NB2 likelihood with means
mu_h = n_h * lambda by profile alternation: a safeguarded Newton solve of the
lambda score given kappa, then of the shape score in theta = 1/kappa given
lambda, until the log-likelihood moves less than 1e-8 or 50 outer rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from .errors import NumericalError, ParameterError

_OUTER_TOL = 1e-8
_MAX_OUTER = 50
_THETA_LO = 1e-8
_THETA_HI = 1e8
# The profile score vanishes like (sum((y-mu)^2) - sum(mu)) / (2 theta^2) as
# theta grows, so at 1e8 its sign drowns in double noise. Probing the sign at
# 1e6 still resolves it; a root beyond the probe means kappa < 1e-6, which is
# reported as the Poisson boundary kappa = 0.
_THETA_PROBE = 1e6

QUASI_POISSON = "quasi-poisson"
NEG_BINOMIAL = "neg-binomial"


@dataclass(frozen=True)
class HistoricalData:
    """Clustered historical counts y_h with their offsets n_h."""

    y: np.ndarray
    offsets: np.ndarray
    cluster_ids: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        y = np.atleast_1d(np.asarray(self.y))
        n = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if y.size != n.size:
            raise ParameterError(f"{y.size} counts vs {n.size} offsets")
        if y.size < 1:
            raise ParameterError("need at least one cluster")
        yf = y.astype(float)
        if not np.all(np.isfinite(yf)) or np.any(yf < 0) or np.any(yf != np.floor(yf)):
            raise ParameterError("counts must be non-negative integers")
        if not np.all(np.isfinite(n)) or np.any(n <= 0.0):
            raise ParameterError("offsets must be finite and > 0")
        object.__setattr__(self, "y", y.astype(np.int64))
        object.__setattr__(self, "offsets", n)
        if self.cluster_ids is not None and len(self.cluster_ids) != y.size:
            raise ParameterError("cluster_ids length does not match counts")

    @property
    def n_clusters(self) -> int:
        return int(self.y.size)

    @property
    def n_bar(self) -> float:
        return float(self.offsets.mean())

    @property
    def total_y(self) -> int:
        return int(self.y.sum())

    @property
    def total_n(self) -> float:
        return float(self.offsets.sum())

    def equal_offsets(self) -> bool:
        return bool(np.all(self.offsets == self.offsets[0]))


@dataclass(frozen=True)
class ModelFit:
    """Fitted rate per offset unit plus a tagged dispersion estimate.

    `dispersion` holds phi_hat for quasi-Poisson fits and kappa_hat for
    negative-binomial fits; the properties guard against mixing them up.
    """

    lambda_hat: float
    model: str
    dispersion: float
    n_clusters: int
    n_bar: float
    converged: bool
    iterations: int
    loglik_trace: tuple[float, ...] = field(default=())

    @property
    def phi_hat(self) -> float:
        if self.model != QUASI_POISSON:
            raise ParameterError(f"phi_hat undefined for a {self.model} fit")
        return self.dispersion

    @property
    def kappa_hat(self) -> float:
        if self.model != NEG_BINOMIAL:
            raise ParameterError(f"kappa_hat undefined for a {self.model} fit")
        return self.dispersion


def _require_fittable(data: HistoricalData) -> None:
    if data.n_clusters < 2:
        raise ParameterError("dispersion estimation needs at least 2 clusters")
    if data.total_y == 0:
        raise NumericalError("all-zero sample: rate undefined on the log scale")


def fit_quasi_poisson(data: HistoricalData) -> ModelFit:
    """Closed-form quasi-Poisson fit: lambda_hat = sum(y)/sum(n), Pearson phi_hat."""
    _require_fittable(data)
    lam = data.total_y / data.total_n
    mu = data.offsets * lam
    phi = float(np.sum((data.y - mu) ** 2 / mu) / (data.n_clusters - 1))
    return ModelFit(
        lambda_hat=float(lam),
        model=QUASI_POISSON,
        dispersion=phi,
        n_clusters=data.n_clusters,
        n_bar=data.n_bar,
        converged=True,
        iterations=0,
    )


def nb_log_likelihood(y: np.ndarray, offsets: np.ndarray, lam: float, theta: float) -> float:
    """NB2 log-likelihood with means n_h*lambda and shape theta = 1/kappa."""
    mu = offsets * lam
    return float(
        np.sum(
            gammaln(y + theta)
            - gammaln(theta)
            - gammaln(y + 1.0)
            + theta * np.log(theta / (theta + mu))
            + y * np.log(mu / (theta + mu))
        )
    )


def _solve_lambda(y: np.ndarray, n: np.ndarray, kappa: float, lam0: float) -> float:
    # Score sum((y - n*lam) / (1 + kappa*n*lam)) = 0 is strictly decreasing in
    # lam, so Newton steps are kept inside a shrinking bisection bracket.
    lam = lam0
    lo, hi = 1e-300, max(1e3, lam0 * 1e6)
    for _ in range(100):
        mu = n * lam
        denom = 1.0 + kappa * mu
        f = float(np.sum((y - mu) / denom))
        fp = float(np.sum(-n * (1.0 + kappa * y) / denom**2))
        if f > 0.0:
            lo = lam
        else:
            hi = lam
        step = f / fp if fp != 0.0 else 0.0
        new = lam - step
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        if abs(new - lam) < 1e-12 * max(1.0, lam):
            return new
        lam = new
    return lam


def _solve_theta(y: np.ndarray, n: np.ndarray, lam: float, theta0: float) -> tuple[float, bool]:
    # Profile score in theta; returns (theta, hit_poisson_boundary).
    mu = n * lam

    def score(th: float) -> float:
        return float(
            np.sum(
                digamma(y + th) - digamma(th) + np.log(th) + 1.0
                - np.log(th + mu) - (y + th) / (th + mu)
            )
        )

    def score_prime(th: float) -> float:
        return float(
            np.sum(
                polygamma(1, y + th) - polygamma(1, th) + 1.0 / th
                - 2.0 / (th + mu) + (y + th) / (th + mu) ** 2
            )
        )

    if score(_THETA_PROBE) >= 0.0:
        # No overdispersion signal: the likelihood wants theta -> infinity.
        return _THETA_HI, True
    lo, hi = _THETA_LO, _THETA_PROBE
    th = min(max(theta0, lo), hi)
    for _ in range(100):
        val = score(th)
        if val > 0.0:
            lo = th
        else:
            hi = th
        fp = score_prime(th)
        new = th - val / fp if fp != 0.0 else 0.5 * (lo + hi)
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)
        if abs(new - th) < 1e-10 * max(1.0, th):
            return new, False
        th = new
    return th, False


def fit_neg_binomial(data: HistoricalData) -> ModelFit:
    """Joint ML of (lambda, kappa) for the NB2 model by profile alternation.

    A sample without an overdispersion signal drives theta to its upper
    bracket and is reported as kappa_hat = 0 with converged=True. A run that
    exhausts the outer iterations returns converged=False with the
    best-so-far estimates; callers doing simulation must count these.
    """
    _require_fittable(data)
    y = data.y.astype(float)
    n = data.offsets
    lam = data.total_y / data.total_n
    mu = n * lam
    kappa0 = max(float((np.sum((y - mu) ** 2) - mu.sum()) / np.sum(mu**2)), 1e-6)
    theta = 1.0 / kappa0
    trace = [nb_log_likelihood(y, n, lam, theta)]

    def finish(kappa: float, converged: bool, iterations: int) -> ModelFit:
        return ModelFit(
            lambda_hat=float(lam),
            model=NEG_BINOMIAL,
            dispersion=float(kappa),
            n_clusters=data.n_clusters,
            n_bar=data.n_bar,
            converged=converged,
            iterations=iterations,
            loglik_trace=tuple(trace),
        )

    for it in range(1, _MAX_OUTER + 1):
        lam = _solve_lambda(y, n, 1.0 / theta, lam)
        theta, at_boundary = _solve_theta(y, n, lam, theta)
        ll = nb_log_likelihood(y, n, lam, theta)
        trace.append(ll)
        if at_boundary:
            return finish(0.0, True, it)
        if abs(ll - trace[-2]) < _OUTER_TOL:
            return finish(1.0 / theta, True, it)
    return finish(1.0 / theta, False, _MAX_OUTER)
