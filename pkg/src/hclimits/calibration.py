"""Bootstrap calibration of prediction limits with equal tail probabilities.

The procedure: refit B parametric bootstrap replicates of the historical
design plus B future observations, then bisect a coefficient q per side until
the bootstrapped coverage of that side hits the target within tolerance. The
calibrated limits apply q_lower/q_upper to the ORIGINAL fit's center and
prediction standard error.

One shared set of B replicate triples (center_b, se_b, y*_b) serves both
sides. Replicate b always draws from substream b of the settings seed, so
results are identical for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError
from .estimation import (
    NEG_BINOMIAL,
    QUASI_POISSON,
    HistoricalData,
    ModelFit,
    fit_neg_binomial,
    fit_quasi_poisson,
)
from .heuristics import RESPONSE, PredictionLimits
from .prediction import (
    TWO_SIDED,
    UPPER_ONLY,
    TargetDesign,
    neg_binomial_std_err,
    quasi_poisson_std_err,
)
from .rng import RngState, poisson_fill
from .sampling import DesignSpec, NegBinParams, QuasiPoissonParams, sample_neg_binomial, sample_quasi_poisson

MODEL_QP = "qp"
MODEL_NB = "nb"

# Sampling clamp for quasi-Poisson bootstrap data when phi_hat falls at or below 1.
PHI_SAMPLING_FLOOR = 1.001
_BRACKET_CAP = 1e6

LOWER = "lower"
UPPER = "upper"


@dataclass(frozen=True)
class CalibrationSettings:
    """Bootstrap size, bisection tolerance and bracket, and the seed state."""

    seed: RngState
    n_boot: int = 10000
    tolerance: float = 0.001
    max_bisection_iters: int = 100
    bracket_hi_init: float = 10.0

    def __post_init__(self) -> None:
        if self.n_boot < 100:
            raise ParameterError(f"need at least 100 bootstrap samples, got {self.n_boot}")
        if not (0.0 < self.tolerance < 0.5):
            raise ParameterError(f"tolerance must be in (0, 0.5), got {self.tolerance}")
        if self.max_bisection_iters < 1 or self.bracket_hi_init <= 0.0:
            raise ParameterError("bisection settings must be positive")


@dataclass(frozen=True)
class BootstrapReplicates:
    """Per-replicate center, prediction standard error, and future draw."""

    center: np.ndarray
    se: np.ndarray
    y_star: np.ndarray
    n_requested: int
    n_dropped: int


@dataclass(frozen=True)
class BisectionOutcome:
    """Calibrated coefficient for one side; converged=False means cap hit."""

    q: float
    achieved_psi: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class CalibrationResult:
    """Calibrated coefficients, their achieved coverages, and the final limits."""

    q_lower: float | None
    q_upper: float
    achieved_psi_lower: float | None
    achieved_psi_upper: float
    n_boot_used: int
    n_dropped: int
    bisection_converged: bool
    limits: PredictionLimits
    fit: ModelFit


def _draw_counts(state: RngState, design: DesignSpec, model: str, lam: float, disp: float) -> np.ndarray:
    # disp is phi for QP (already clamped by the caller) and kappa for NB.
    # kappa == 0 is the Poisson boundary, which the NB sampler's domain excludes.
    if model == MODEL_QP:
        return sample_quasi_poisson(state, design, QuasiPoissonParams(lam, disp))
    if disp <= 0.0:
        return poisson_fill(state, design.offsets * lam)
    return sample_neg_binomial(state, design, NegBinParams(lam, disp))


def bootstrap_replicates(
    fit: ModelFit,
    design: DesignSpec,
    target: TargetDesign,
    settings: CalibrationSettings,
    model: str,
) -> BootstrapReplicates:
    """B parametric bootstrap triples (center_b, se_b, y*_b) under the fit.

    Historical replicates follow the historical design, futures the target
    offset; each replicate is refit with the same model. Replicates whose
    refit fails (all-zero sample, or a non-converged NB fit) are dropped and
    counted; more than 50% drops aborts the calibration.
    """
    if model not in (MODEL_QP, MODEL_NB):
        raise ParameterError(f"unknown model {model!r}")
    if fit.lambda_hat <= 0.0:
        raise NumericalError("bootstrap needs lambda_hat > 0")
    lam = fit.lambda_hat
    disp = max(fit.phi_hat, PHI_SAMPLING_FLOOR) if model == MODEL_QP else fit.kappa_hat
    n_boot = settings.n_boot
    h = design.n_clusters
    # Historical clusters and the future observation are independent draws, so
    # replicate b takes them from one extended-design call on substream b.
    extended = DesignSpec(np.append(design.offsets, target.n_star))

    counts = np.empty((n_boot, h), dtype=np.int64)
    y_star = np.empty(n_boot, dtype=np.int64)
    for b in range(n_boot):
        st = settings.seed.substream(b)
        drawn = _draw_counts(st, extended, model, lam, disp)
        counts[b] = drawn[:h]
        y_star[b] = drawn[h]

    if model == MODEL_QP:
        center, se, kept = _refit_quasi_poisson(counts, design, target)
    else:
        center, se, kept = _refit_neg_binomial(counts, design, target)

    n_dropped = n_boot - int(kept.sum())
    if n_dropped > 0.5 * n_boot:
        raise NumericalError(
            f"unstable bootstrap: {n_dropped}/{n_boot} replicate refits failed"
        )
    return BootstrapReplicates(
        center=center[kept],
        se=se[kept],
        y_star=y_star[kept].astype(float),
        n_requested=n_boot,
        n_dropped=n_dropped,
    )


def _refit_quasi_poisson(
    counts: np.ndarray, design: DesignSpec, target: TargetDesign
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Row-wise version of fit_quasi_poisson + quasi_poisson_std_err; the
    # closed forms make the refit loop-free.
    h = design.n_clusters
    lam_b = counts.sum(axis=1) / design.offsets.sum()
    kept = lam_b > 0.0
    lam_safe = np.where(kept, lam_b, 1.0)
    mu = lam_safe[:, None] * design.offsets[None, :]
    phi_b = np.sum((counts - mu) ** 2 / mu, axis=1) / (h - 1)
    phi_used = np.maximum(phi_b, 1.0)
    center = target.n_star * lam_b
    var_est = target.n_star**2 * phi_used * lam_safe / (design.n_bar * h)
    var_fut = phi_used * target.n_star * lam_safe
    return center, np.sqrt(var_est + var_fut), kept


def _refit_neg_binomial(
    counts: np.ndarray, design: DesignSpec, target: TargetDesign
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_boot = counts.shape[0]
    center = np.zeros(n_boot)
    se = np.zeros(n_boot)
    kept = np.zeros(n_boot, dtype=bool)
    for b in range(n_boot):
        try:
            refit = fit_neg_binomial(HistoricalData(counts[b], design.offsets))
        except NumericalError:
            continue
        if not refit.converged:
            continue
        err = neg_binomial_std_err(refit, target)
        center[b] = target.n_star * refit.lambda_hat
        se[b] = err.se
        kept[b] = True
    return center, se, kept


def bisect_coefficient(
    replicates: BootstrapReplicates,
    side: str,
    target_psi: float,
    settings: CalibrationSettings,
) -> BisectionOutcome:
    """Bisect q until the bootstrapped side coverage is within tolerance.

    psi(q) is a non-decreasing step function with 1/B granularity. The
    bracket grows upward by doubling until psi(hi) >= target, then bisection
    pins the smallest q whose psi reaches target - tolerance: the smallest q
    inside the tolerance band. converged=False flags a psi jump that
    overshoots the band (granularity coarser than the tolerance) or a
    degenerate psi stuck above it.
    """
    if replicates.center.size == 0:
        raise ParameterError("no replicates to calibrate against")
    if not (0.0 < target_psi < 1.0):
        raise ParameterError(f"target coverage must be in (0, 1), got {target_psi}")
    if side == LOWER:

        def psi(q: float) -> float:
            return float(np.mean(replicates.center - q * replicates.se <= replicates.y_star))

    elif side == UPPER:

        def psi(q: float) -> float:
            return float(np.mean(replicates.y_star <= replicates.center + q * replicates.se))

    else:
        raise ParameterError(f"side must be {LOWER!r} or {UPPER!r}")

    tol = settings.tolerance
    # one float ulp of slack so a psi landing exactly on the band edge counts
    band = tol + 1e-12
    hi = settings.bracket_hi_init
    while psi(hi) < target_psi:
        hi *= 2.0
        if hi > _BRACKET_CAP:
            raise NumericalError("calibration bracket exploded; se_b is degenerate")
    floor = target_psi - tol
    p0 = psi(0.0)
    if p0 >= floor:
        return BisectionOutcome(0.0, p0, abs(p0 - target_psi) <= band, 0)
    lo, it = 0.0, 0
    for it in range(1, settings.max_bisection_iters + 1):
        mid = 0.5 * (lo + hi)
        if psi(mid) >= floor:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    p = psi(hi)
    return BisectionOutcome(hi, p, abs(p - target_psi) <= band, it)


def calibrated_pi(
    data: HistoricalData,
    target: TargetDesign,
    settings: CalibrationSettings,
    model: str,
) -> CalibrationResult:
    """Bootstrap-calibrated prediction interval (or upper bound) for the data.

    Two-sided targets calibrate both sides at 1 - alpha/2 each; upper-only
    calibrates only q_upper at 1 - alpha. Final limits use the original
    fit's center n* * lambda_hat and standard error.
    """
    if model == MODEL_QP:
        fit = fit_quasi_poisson(data)
        err = quasi_poisson_std_err(fit, target)
        method = "calib-qp"
    elif model == MODEL_NB:
        fit = fit_neg_binomial(data)
        if not fit.converged:
            raise NumericalError("negative-binomial fit did not converge")
        err = neg_binomial_std_err(fit, target)
        method = "calib-nb"
    else:
        raise ParameterError(f"unknown model {model!r}")

    design = DesignSpec(data.offsets)
    reps = bootstrap_replicates(fit, design, target, settings, model)
    center = target.n_star * fit.lambda_hat

    if target.sidedness == TWO_SIDED:
        side_target = 1.0 - target.alpha / 2.0
        low_out = bisect_coefficient(reps, LOWER, side_target, settings)
        up_out = bisect_coefficient(reps, UPPER, side_target, settings)
        limits = PredictionLimits(
            center - low_out.q * err.se, center + up_out.q * err.se,
            method, target.alpha, RESPONSE,
        )
        return CalibrationResult(
            q_lower=low_out.q,
            q_upper=up_out.q,
            achieved_psi_lower=low_out.achieved_psi,
            achieved_psi_upper=up_out.achieved_psi,
            n_boot_used=int(reps.center.size),
            n_dropped=reps.n_dropped,
            bisection_converged=low_out.converged and up_out.converged,
            limits=limits,
            fit=fit,
        )
    if target.sidedness != UPPER_ONLY:
        raise ParameterError(f"unknown sidedness {target.sidedness!r}")
    up_out = bisect_coefficient(reps, UPPER, 1.0 - target.alpha, settings)
    limits = PredictionLimits(
        -math.inf, center + up_out.q * err.se, method, target.alpha, RESPONSE
    )
    return CalibrationResult(
        q_lower=None,
        q_upper=up_out.q,
        achieved_psi_lower=None,
        achieved_psi_upper=up_out.achieved_psi,
        n_boot_used=int(reps.center.size),
        n_dropped=reps.n_dropped,
        bisection_converged=up_out.converged,
        limits=limits,
        fit=fit,
    )
