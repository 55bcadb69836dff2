"""Uncalibrated asymptotic prediction intervals for a future count over n* units.

Center is n* * lambda_hat; the half width is z times the prediction standard
error, whose square splits into the estimation part var(n* lambda_hat) and
the future-observation part var(Y*):

    simple Poisson   n*^2 lam/n                 + n* lam
    quasi-Poisson    n*^2 phi lam / (n_bar H)   + phi n* lam        (phi >= 1)
    negative-binom.  n*^2 (lam + kap n_bar lam) / (n_bar H)
                                                + n* lam + kap n*^2 lam^2

The NB estimation variance above is the published main-text form; the
"supplement" variant replaces the inner lam with lam^2
(var(lambda_hat) = (lam + kap n_bar lam^2)/(n_bar H)). Both are available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NumericalError, ParameterError
from .estimation import NEG_BINOMIAL, QUASI_POISSON, ModelFit
from .heuristics import RESPONSE, PredictionLimits

TWO_SIDED = "two_sided"
UPPER_ONLY = "upper_only"

VARIANT_MAIN_TEXT = "main-text"
VARIANT_SUPPLEMENT = "supplement"

# AS241 (PPND16) rational-approximation coefficients for the inverse normal.
_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
_B = (
    4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
    2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
_D = (
    2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
    1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7,
)
_F = (
    5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
    7.86869131145613259100e-4, 1.84631831751005468180e-6, 1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def normal_quantile(p: float) -> float:
    """Standard normal quantile by the AS241 rational approximation (~1e-16)."""
    if not (0.0 < p < 1.0):
        raise ParameterError(f"quantile level must be in (0, 1), got {p}")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = ((((((_A[7] * r + _A[6]) * r + _A[5]) * r + _A[4]) * r + _A[3]) * r + _A[2]) * r + _A[1]) * r + _A[0]
        den = ((((((_B[6] * r + _B[5]) * r + _B[4]) * r + _B[3]) * r + _B[2]) * r + _B[1]) * r + _B[0]) * r + 1.0
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = ((((((_C[7] * r + _C[6]) * r + _C[5]) * r + _C[4]) * r + _C[3]) * r + _C[2]) * r + _C[1]) * r + _C[0]
        den = ((((((_D[6] * r + _D[5]) * r + _D[4]) * r + _D[3]) * r + _D[2]) * r + _D[1]) * r + _D[0]) * r + 1.0
    else:
        r -= 5.0
        num = ((((((_E[7] * r + _E[6]) * r + _E[5]) * r + _E[4]) * r + _E[3]) * r + _E[2]) * r + _E[1]) * r + _E[0]
        den = ((((((_F[6] * r + _F[5]) * r + _F[4]) * r + _F[3]) * r + _F[2]) * r + _F[1]) * r + _F[0]) * r + 1.0
    val = num / den
    return -val if q < 0.0 else val


@dataclass(frozen=True)
class TargetDesign:
    """Offset of the future observation, nominal level, and sidedness."""

    n_star: float
    alpha: float
    sidedness: str = TWO_SIDED

    def __post_init__(self) -> None:
        if not (math.isfinite(self.n_star) and self.n_star > 0.0):
            raise ParameterError(f"n_star must be finite and > 0, got {self.n_star}")
        if not (0.0 < self.alpha < 1.0):
            raise ParameterError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.sidedness not in (TWO_SIDED, UPPER_ONLY):
            raise ParameterError(f"unknown sidedness {self.sidedness!r}")

    @property
    def z(self) -> float:
        """Normal quantile matching the sidedness: z_{1-a/2} or z_{1-a}."""
        if self.sidedness == TWO_SIDED:
            return normal_quantile(1.0 - self.alpha / 2.0)
        return normal_quantile(1.0 - self.alpha)


@dataclass(frozen=True)
class PredictionStdErr:
    """Variance split of the prediction: estimation part plus future part."""

    var_estimation: float
    var_future: float

    @property
    def se(self) -> float:
        return math.sqrt(self.var_estimation + self.var_future)


def _assemble(center: float, se: float, target: TargetDesign, method: str) -> PredictionLimits:
    z = target.z
    if target.sidedness == UPPER_ONLY:
        return PredictionLimits(-math.inf, center + z * se, method, target.alpha, RESPONSE)
    return PredictionLimits(center - z * se, center + z * se, method, target.alpha, RESPONSE)


def simple_poisson_pi(y: int, n: float, target: TargetDesign) -> PredictionLimits:
    """Prediction interval from one cluster under the plain Poisson model."""
    if y < 0 or int(y) != y:
        raise ParameterError(f"count must be a non-negative integer, got {y}")
    if n <= 0.0:
        raise ParameterError(f"offset must be > 0, got {n}")
    lam = y / n
    if lam == 0.0:
        return PredictionLimits(0.0, 0.0, "simple-pois", target.alpha, RESPONSE, degenerate=True)
    center = target.n_star * lam
    se = math.sqrt(target.n_star**2 * lam / n + target.n_star * lam)
    return _assemble(center, se, target, "simple-pois")


def quasi_poisson_std_err(fit: ModelFit, target: TargetDesign) -> PredictionStdErr:
    """Quasi-Poisson prediction variance split, with phi clamped to >= 1."""
    phi = max(fit.phi_hat, 1.0)
    lam = fit.lambda_hat
    var_est = target.n_star**2 * phi * lam / (fit.n_bar * fit.n_clusters)
    var_fut = phi * target.n_star * lam
    return PredictionStdErr(var_est, var_fut)


def quasi_poisson_pi(fit: ModelFit, target: TargetDesign) -> tuple[PredictionLimits, PredictionStdErr]:
    """Quasi-Poisson prediction interval about n* * lambda_hat."""
    if fit.model != QUASI_POISSON:
        raise ParameterError("need a quasi-Poisson fit")
    if fit.n_clusters < 1 or fit.lambda_hat <= 0.0:
        raise NumericalError("quasi-Poisson interval needs H >= 1 and lambda_hat > 0")
    err = quasi_poisson_std_err(fit, target)
    return _assemble(target.n_star * fit.lambda_hat, err.se, target, "qp"), err


def neg_binomial_std_err(
    fit: ModelFit, target: TargetDesign, variant: str = VARIANT_MAIN_TEXT
) -> PredictionStdErr:
    """Negative-binomial prediction variance split, main-text or supplement form."""
    lam, kap = fit.lambda_hat, fit.kappa_hat
    nb, h = fit.n_bar, fit.n_clusters
    if variant == VARIANT_MAIN_TEXT:
        var_est = target.n_star**2 * (lam + kap * nb * lam) / (nb * h)
    elif variant == VARIANT_SUPPLEMENT:
        var_est = target.n_star**2 * (lam + kap * nb * lam**2) / (nb * h)
    else:
        raise ParameterError(f"unknown variant {variant!r}")
    var_fut = target.n_star * lam + kap * target.n_star**2 * lam**2
    return PredictionStdErr(var_est, var_fut)


def neg_binomial_pi(
    fit: ModelFit, target: TargetDesign, variant: str = VARIANT_MAIN_TEXT
) -> tuple[PredictionLimits, PredictionStdErr]:
    """Negative-binomial prediction interval about n* * lambda_hat."""
    if fit.model != NEG_BINOMIAL:
        raise ParameterError("need a negative-binomial fit")
    if fit.kappa_hat < 0.0:
        raise ParameterError(f"kappa_hat must be >= 0, got {fit.kappa_hat}")
    if not fit.converged:
        raise NumericalError("negative-binomial fit did not converge")
    if fit.lambda_hat <= 0.0:
        raise NumericalError("negative-binomial interval needs lambda_hat > 0")
    err = neg_binomial_std_err(fit, target, variant)
    return _assemble(target.n_star * fit.lambda_hat, err.se, target, "nb"), err
