"""Monte-Carlo coverage study engine.

Each replicate draws a historical data set and one target observation from
the same generator, computes limits by the method under test, and scores the
indicators behind psi_cp (both sides hold), psi_l (lower holds) and psi_u
(upper holds). u-chart methods compare against the target rate y*/n*; all
other methods against the count y*. Negative-binomial generator cells derive
kappa = (phi - 1) / (n_bar * lambda) with n_bar the design mean, so the
dispersion is comparable across generators.

Coverages are computed over the replicates whose model fit converged;
s_used/s_total reports that accounting per cell.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .calibration import MODEL_NB, MODEL_QP, CalibrationSettings, calibrated_pi
from .errors import HclimitsError, NumericalError, ParameterError
from .estimation import HistoricalData, fit_neg_binomial, fit_quasi_poisson
from .heuristics import (
    PredictionLimits,
    c_chart_limits,
    laney_u_chart_limits,
    mean_sd_limits,
    u_chart_limits,
)
from .prediction import (
    TWO_SIDED,
    UPPER_ONLY,
    TargetDesign,
    neg_binomial_pi,
    normal_quantile,
    quasi_poisson_pi,
)
from .rng import RngState, mix_stream
from .sampling import DesignSpec, NegBinParams, QuasiPoissonParams, sample_neg_binomial, sample_quasi_poisson

HEURISTIC_METHODS = ("mean-sd", "c-chart", "u-chart", "laney")
INTERVAL_METHODS = ("qp", "nb", "calib-qp", "calib-nb")
METHODS = HEURISTIC_METHODS + INTERVAL_METHODS
# Methods whose limits live on the per-offset-unit scale: score against y*/n*.
U_SCALE_METHODS = ("u-chart", "laney")

CSV_COLUMNS = (
    "generator", "method", "H", "lambda", "phi", "offset_lo", "offset_hi",
    "n_star", "alpha", "S_used", "S_total", "psi_cp", "psi_l", "psi_u",
)


@dataclass(frozen=True)
class SimCell:
    """One parameter combination of the coverage study."""

    generator: str
    method: str
    n_clusters: int
    lam: float
    phi: float
    offset_lo: float
    offset_hi: float
    n_star: float | None  # None: draw fresh from Uniform(offset_lo, offset_hi)
    alpha: float = 0.05
    n_sims: int = 500
    n_boot: int = 2000
    k: float | None = None  # heuristic multiplier; defaults to z_{1-alpha/2}
    sidedness: str = TWO_SIDED
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self) -> None:
        if self.generator not in (MODEL_QP, MODEL_NB):
            raise ParameterError(f"unknown generator {self.generator!r}")
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.n_clusters < 1 or self.n_sims < 1:
            raise ParameterError("H and S must be >= 1")
        if self.lam <= 0.0 or self.phi <= 1.0:
            raise ParameterError("need lambda > 0 and phi > 1")
        if not (0.0 < self.offset_lo <= self.offset_hi):
            raise ParameterError("need 0 < offset_lo <= offset_hi")
        if not (0.0 < self.alpha < 1.0):
            raise ParameterError("alpha must be in (0, 1)")
        if self.method in ("mean-sd", "c-chart") and self.offset_lo != self.offset_hi:
            raise ParameterError(f"{self.method} needs a fixed offset design")
        if self.sidedness not in (TWO_SIDED, UPPER_ONLY):
            raise ParameterError(f"unknown sidedness {self.sidedness!r}")

    @property
    def fixed_offsets(self) -> bool:
        return self.offset_lo == self.offset_hi

    @property
    def design_n_bar(self) -> float:
        return 0.5 * (self.offset_lo + self.offset_hi)

    @property
    def k_effective(self) -> float:
        return self.k if self.k is not None else normal_quantile(1.0 - self.alpha / 2.0)


@dataclass(frozen=True)
class CoverageReport:
    """Simulated coverages over the converged replicates of one cell."""

    psi_cp: float
    psi_l: float
    psi_u: float
    s_used: int
    s_total: int


def _draw_design(cell: SimCell, state: RngState) -> np.ndarray:
    if cell.fixed_offsets:
        return np.full(cell.n_clusters, cell.offset_lo)
    u = state.uniform(cell.n_clusters)
    return cell.offset_lo + (cell.offset_hi - cell.offset_lo) * u


def _draw_counts(cell: SimCell, state: RngState, offsets: np.ndarray) -> np.ndarray:
    design = DesignSpec(offsets)
    if cell.generator == MODEL_QP:
        return sample_quasi_poisson(state, design, QuasiPoissonParams(cell.lam, cell.phi))
    kappa = (cell.phi - 1.0) / (cell.design_n_bar * cell.lam)
    return sample_neg_binomial(state, design, NegBinParams(cell.lam, kappa))


def _limits_for_method(
    cell: SimCell, data: HistoricalData, n_star: float, state: RngState
) -> PredictionLimits:
    method = cell.method
    if method == "mean-sd":
        return mean_sd_limits(data, cell.k_effective)
    if method == "c-chart":
        return c_chart_limits(data, cell.k_effective)
    if method == "u-chart":
        return u_chart_limits(data, cell.k_effective, n_star)
    if method == "laney":
        return laney_u_chart_limits(data, cell.k_effective, n_star)[0]
    target = TargetDesign(n_star, cell.alpha, cell.sidedness)
    if method == "qp":
        return quasi_poisson_pi(fit_quasi_poisson(data), target)[0]
    if method == "nb":
        fit = fit_neg_binomial(data)
        if not fit.converged:
            raise NumericalError("refit did not converge")
        return neg_binomial_pi(fit, target)[0]
    settings = CalibrationSettings(seed=state, n_boot=cell.n_boot)
    model = MODEL_QP if method == "calib-qp" else MODEL_NB
    return calibrated_pi(data, target, settings, model).limits


def run_cell(cell: SimCell) -> CoverageReport:
    """Simulate one cell: S replicates of draw -> fit -> limits -> score."""
    base = RngState(cell.seed, cell.stream_id)
    hits_l = hits_u = hits_cp = used = 0
    for s in range(cell.n_sims):
        st = base.substream(s)
        offsets = _draw_design(cell, st)
        counts = _draw_counts(cell, st, offsets)
        n_star = cell.n_star
        if n_star is None:
            u = float(st.uniform())
            n_star = cell.offset_lo + (cell.offset_hi - cell.offset_lo) * u
        y_star = int(_draw_counts(cell, st, np.array([n_star]))[0])
        try:
            data = HistoricalData(counts, offsets)
            limits = _limits_for_method(cell, data, n_star, st)
        except NumericalError:
            continue  # non-converged or degenerate replicate: excluded, counted
        t_star = y_star / n_star if cell.method in U_SCALE_METHODS else float(y_star)
        i_l = limits.lower <= t_star
        i_u = t_star <= limits.upper
        used += 1
        hits_l += i_l
        hits_u += i_u
        hits_cp += i_l and i_u
    if used == 0:
        raise NumericalError(f"no converged replicates in cell {cell}")
    return CoverageReport(
        psi_cp=hits_cp / used,
        psi_l=hits_l / used,
        psi_u=hits_u / used,
        s_used=used,
        s_total=cell.n_sims,
    )


@dataclass(frozen=True)
class GridRow:
    """Outcome of one grid cell: a report, or the error that stopped it."""

    cell: SimCell
    report: CoverageReport | None
    error: str | None = None


def run_grid(cells: list[SimCell]) -> list[GridRow]:
    """Run every cell, never aborting the grid on a per-cell failure."""
    rows: list[GridRow] = []
    for i, cell in enumerate(cells):
        cell = replace(cell, stream_id=mix_cell_stream(cell.stream_id, i))
        try:
            rows.append(GridRow(cell, run_cell(cell)))
        except HclimitsError as exc:
            rows.append(GridRow(cell, None, str(exc)))
    return rows


def mix_cell_stream(stream_id: int, cell_index: int) -> int:
    """Per-cell stream derivation; replicate s then substreams from this."""
    return mix_stream(stream_id, cell_index)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def write_grid_csv(rows: list[GridRow], stream) -> None:
    """Long-format CSV, one row per cell; failed cells keep their row with
    empty psi fields."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        c = row.cell
        base = [
            c.generator, c.method, c.n_clusters, _fmt(c.lam), _fmt(c.phi),
            _fmt(c.offset_lo), _fmt(c.offset_hi),
            _fmt(c.n_star) if c.n_star is not None else "",
            _fmt(c.alpha),
        ]
        if row.report is None:
            writer.writerow(base + [0, c.n_sims, "", "", ""])
        else:
            r = row.report
            writer.writerow(
                base + [r.s_used, r.s_total, _fmt(r.psi_cp), _fmt(r.psi_l), _fmt(r.psi_u)]
            )


def cells_from_grid(
    generator: str,
    methods: list[str],
    n_clusters_values: list[int],
    lam_values: list[float],
    phi_values: list[float],
    *,
    offset_lo: float,
    offset_hi: float,
    n_star: float | None,
    alpha: float = 0.05,
    n_sims: int = 500,
    n_boot: int = 2000,
    k: float | None = None,
    sidedness: str = TWO_SIDED,
    seed: int = 0,
) -> list[SimCell]:
    """Cross product of methods x H x lambda x phi into SimCells."""
    cells = []
    for method in methods:
        for h in n_clusters_values:
            for lam in lam_values:
                for phi in phi_values:
                    cells.append(
                        SimCell(
                            generator=generator,
                            method=method,
                            n_clusters=h,
                            lam=lam,
                            phi=phi,
                            offset_lo=offset_lo,
                            offset_hi=offset_hi,
                            n_star=n_star,
                            alpha=alpha,
                            n_sims=n_sims,
                            n_boot=n_boot,
                            k=k,
                            sidedness=sidedness,
                            seed=seed,
                        )
                    )
    return cells
