"""Heuristic historical control limits: mean +/- k SD, c-chart, u-chart,
and the overdispersion-adjusted (Laney) u-chart.

All four are symmetric about their center. mean-sd and c-chart require equal
offsets; the u-charts work on rates y_h/n_h and are reported per offset unit
(multiply by n* for the response scale).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError
from .estimation import HistoricalData

RESPONSE = "response"
PER_OFFSET_UNIT = "per_offset_unit"


@dataclass(frozen=True)
class PredictionLimits:
    """A lower/upper limit pair with its method tag and level.

    `level` carries the k multiplier for heuristic charts and alpha for
    prediction intervals. covered_counts gives the lowest/highest integer
    inside the interval (ceil(lower), floor(upper)); count semantics apply on
    the response scale.
    """

    lower: float
    upper: float
    method: str
    level: float
    scale: str = RESPONSE
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.upper < self.lower:
            raise ParameterError(f"upper {self.upper} below lower {self.lower}")

    @property
    def covered_counts(self) -> tuple[int | None, int | None]:
        low = math.ceil(self.lower) if math.isfinite(self.lower) else None
        high = math.floor(self.upper) if math.isfinite(self.upper) else None
        return (low, high)

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class UChartStats:
    """Audit intermediates of the adjusted u-chart.

    sigma_z uses divisor H exactly as printed in the source chart definition
    (not the customary H-1).
    """

    u_bar: float
    z_scores: np.ndarray
    sigma_z: float


def _require_equal_offsets(data: HistoricalData, method: str) -> None:
    if not data.equal_offsets():
        raise ParameterError(f"{method} requires all offsets equal")


def mean_sd_limits(data: HistoricalData, k: float) -> PredictionLimits:
    """y_bar +/- k * sample SD (divisor H-1); equal offsets only."""
    if k <= 0.0:
        raise ParameterError("k must be > 0")
    _require_equal_offsets(data, "mean-sd")
    if data.n_clusters < 2:
        raise ParameterError("mean-sd needs at least 2 clusters")
    y_bar = float(data.y.mean())
    sd = float(data.y.std(ddof=1))
    return PredictionLimits(y_bar - k * sd, y_bar + k * sd, "mean-sd", k, RESPONSE)


def c_chart_limits(data: HistoricalData, k: float) -> PredictionLimits:
    """Sheward c-chart: y_bar +/- k * sqrt(y_bar); equal offsets only."""
    if k <= 0.0:
        raise ParameterError("k must be > 0")
    _require_equal_offsets(data, "c-chart")
    if data.n_clusters < 2:
        raise ParameterError("c-chart needs at least 2 clusters")
    y_bar = float(data.y.mean())
    half = k * math.sqrt(y_bar)
    return PredictionLimits(y_bar - half, y_bar + half, "c-chart", k, RESPONSE)


def u_chart_limits(data: HistoricalData, k: float, n_star: float) -> PredictionLimits:
    """Sheward u-chart: u_bar +/- k * sqrt(u_bar/n*), per offset unit."""
    if k <= 0.0:
        raise ParameterError("k must be > 0")
    if n_star <= 0.0:
        raise ParameterError("n_star must be > 0")
    u_bar = float((data.y / data.offsets).mean())
    half = k * math.sqrt(u_bar / n_star)
    return PredictionLimits(u_bar - half, u_bar + half, "u-chart", k, PER_OFFSET_UNIT)


def laney_u_chart_limits(
    data: HistoricalData, k: float, n_star: float
) -> tuple[PredictionLimits, UChartStats]:
    """Overdispersion-adjusted u-chart: u-chart width scaled by sigma_z.

    z_h = (u_h - u_bar) / sqrt(u_bar/n_h), sigma_z = sqrt(sum((z_h-z_bar)^2)/H).
    """
    if k <= 0.0:
        raise ParameterError("k must be > 0")
    if n_star <= 0.0:
        raise ParameterError("n_star must be > 0")
    if data.n_clusters < 2:
        raise ParameterError("adjusted u-chart needs at least 2 clusters")
    u = data.y / data.offsets
    u_bar = float(u.mean())
    if u_bar == 0.0:
        raise NumericalError("zero mean rate: z-scores undefined")
    z = (u - u_bar) / np.sqrt(u_bar / data.offsets)
    sigma_z = float(np.sqrt(np.sum((z - z.mean()) ** 2) / data.n_clusters))
    half = k * math.sqrt(u_bar / n_star) * sigma_z
    limits = PredictionLimits(u_bar - half, u_bar + half, "laney", k, PER_OFFSET_UNIT)
    return limits, UChartStats(u_bar=u_bar, z_scores=z, sigma_z=sigma_z)
