"""Command-line front end.

Commands: fit, limits, calibrate, sample, simulate, chart. Every command
accepts --config FILE with flat `key = value` pairs; explicit flags override
config values, which override defaults. Randomized commands require --seed.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import functools
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import chart as chartmod
from .calibration import MODEL_NB, MODEL_QP, CalibrationSettings, calibrated_pi
from .coverage import METHODS as SIM_METHODS
from .coverage import cells_from_grid, run_grid, write_grid_csv
from .dataio import fmt6, read_config, read_dataset, write_dataset
from .errors import DataError, NumericalError, ParameterError
from .estimation import (
    NEG_BINOMIAL,
    QUASI_POISSON,
    HistoricalData,
    ModelFit,
    fit_neg_binomial,
    fit_quasi_poisson,
)
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
    simple_poisson_pi,
)
from .rng import RngState
from .sampling import (
    DesignSpec,
    NegBinParams,
    QuasiPoissonParams,
    sample_neg_binomial,
    sample_quasi_poisson,
    sample_uniform_offsets,
)

LIMIT_METHODS = ("mean-sd", "c-chart", "u-chart", "laney", "simple-pois", "qp", "nb")
CHART_METHODS = ("mean-sd", "c-chart", "u-chart", "laney", "qp", "nb", "calib-qp", "calib-nb")


def _guarded(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            func(*args, **kwargs)
        except (ParameterError, DataError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except NumericalError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(4)

    return wrapper


class _Resolver:
    """Flag > config > default resolution for one command invocation."""

    def __init__(self, config_path: str | None):
        self.cfg = read_config(config_path) if config_path else {}

    def value(self, flag, key: str, cast, default=None):
        if flag is not None:
            return flag
        if key in self.cfg:
            try:
                return cast(self.cfg[key])
            except ValueError:
                raise ParameterError(f"config key {key!r}: cannot parse {self.cfg[key]!r}") from None
        return default

    def flag(self, flag: bool, key: str) -> bool:
        if flag:
            return True
        return self.cfg.get(key, "").strip().lower() in ("1", "true", "yes", "on")


def _require_seed(seed: int | None) -> int:
    if seed is None:
        raise ParameterError("--seed is required for randomized commands")
    return seed


def _echo_table(pairs) -> None:
    width = max(len(k) for k, _ in pairs)
    for key, value in pairs:
        click.echo(f"{key:<{width}}  {value}")


def _fmt2(x: float) -> str:
    return f"{x:.2f}"


def _open_out(out: str | None):
    if out is None or out == "-":
        return sys.stdout, False
    return open(out, "w", newline=""), True


def _write_kv_csv(out: str | None, header: list[str], row: list[str]) -> None:
    stream, close = _open_out(out)
    try:
        stream.write(",".join(header) + "\n")
        stream.write(",".join(row) + "\n")
    finally:
        if close:
            stream.close()


@click.group()
@click.version_option(package_name="hclimits", prog_name="hclimits")
def main() -> None:
    """Historical control limits for overdispersed count data."""


@main.command("fit")
@click.argument("data_file", type=click.Path())
@click.option("--model", type=click.Choice([MODEL_QP, MODEL_NB]), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", default=None, help="write the fit as CSV instead of a table")
@_guarded
def fit_cmd(data_file, model, config_path, out) -> None:
    """Fit the intercept-only count GLM with offsets to a dataset."""
    res = _Resolver(config_path)
    model = res.value(model, "model", str, MODEL_QP)
    data = read_dataset(data_file)
    fit = fit_quasi_poisson(data) if model == MODEL_QP else fit_neg_binomial(data)
    disp_name = "phi_hat" if fit.model == QUASI_POISSON else "kappa_hat"
    if out:
        _write_kv_csv(
            out,
            ["model", "H", "n_bar", "lambda_hat", "dispersion", "converged", "iterations"],
            [fit.model, str(fit.n_clusters), fmt6(fit.n_bar), fmt6(fit.lambda_hat),
             fmt6(fit.dispersion), str(fit.converged).lower(), str(fit.iterations)],
        )
    else:
        _echo_table([
            ("model", fit.model),
            ("clusters (H)", str(fit.n_clusters)),
            ("n_bar", _fmt2(fit.n_bar)),
            ("lambda_hat", _fmt2(fit.lambda_hat)),
            (disp_name, _fmt2(fit.dispersion)),
            ("converged", "yes" if fit.converged else "no"),
            ("iterations", str(fit.iterations)),
        ])
    if not fit.converged:
        raise NumericalError("negative-binomial fit did not converge")


def _clamped(limits: PredictionLimits, clamp_zero: bool) -> PredictionLimits:
    if clamp_zero and math.isfinite(limits.lower) and limits.lower < 0.0:
        return PredictionLimits(0.0, max(limits.upper, 0.0), limits.method,
                                limits.level, limits.scale, limits.degenerate)
    return limits


def _emit_limits(limits: PredictionLimits, out: str | None, extra: list[tuple[str, str]] = ()) -> None:
    low, high = limits.covered_counts
    if out:
        header = ["method", "scale", "level", "lower", "upper", "covered_low", "covered_high"]
        row = [limits.method, limits.scale, fmt6(limits.level),
               fmt6(limits.lower) if math.isfinite(limits.lower) else "-inf",
               fmt6(limits.upper),
               "" if low is None else str(low), "" if high is None else str(high)]
        for key, value in extra:
            header.append(key)
            row.append(value)
        _write_kv_csv(out, header, row)
    else:
        pairs = [
            ("method", limits.method),
            ("scale", limits.scale),
            ("level", fmt6(limits.level)),
            ("lower", _fmt2(limits.lower) if math.isfinite(limits.lower) else "-inf"),
            ("upper", _fmt2(limits.upper)),
            ("covered counts", f"{'-' if low is None else low} .. {'-' if high is None else high}"),
        ]
        pairs += [(k, v) for k, v in extra]
        if limits.degenerate:
            pairs.append(("degenerate", "yes"))
        _echo_table(pairs)


@main.command("limits")
@click.argument("data_file", type=click.Path())
@click.option("--method", type=click.Choice(LIMIT_METHODS), default=None)
@click.option("--k", type=float, default=None, help="multiplier for heuristic charts (default 1.96)")
@click.option("--alpha", type=float, default=None)
@click.option("--n-star", type=float, default=None, help="target offset (default: mean historical offset)")
@click.option("--variant", type=click.Choice(["main-text", "supplement"]), default=None)
@click.option("--clamp-zero", is_flag=True, default=False)
@click.option("--upper-only", is_flag=True, default=False)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", default=None)
@_guarded
def limits_cmd(data_file, method, k, alpha, n_star, variant, clamp_zero, upper_only, config_path, out) -> None:
    """Compute historical control limits by one method."""
    res = _Resolver(config_path)
    method = res.value(method, "method", str, None)
    if method is None:
        raise ParameterError("--method is required")
    if method not in LIMIT_METHODS:
        raise ParameterError(f"unknown method {method!r}")
    k = res.value(k, "k", float, 1.96)
    alpha = res.value(alpha, "alpha", float, 0.05)
    variant = res.value(variant, "variant", str, "main-text")
    clamp_zero = res.flag(clamp_zero, "clamp_zero")
    upper_only = res.flag(upper_only, "upper_only")
    data = read_dataset(data_file)
    n_star = res.value(n_star, "n_star", float, data.n_bar)
    sidedness = UPPER_ONLY if upper_only else TWO_SIDED

    if method in ("mean-sd", "c-chart", "u-chart", "laney"):
        if upper_only:
            raise ParameterError("heuristic charts are two-sided; drop --upper-only")
        if method == "mean-sd":
            limits = mean_sd_limits(data, k)
        elif method == "c-chart":
            limits = c_chart_limits(data, k)
        elif method == "u-chart":
            limits = u_chart_limits(data, k, n_star)
        else:
            limits = laney_u_chart_limits(data, k, n_star)[0]
        _emit_limits(_clamped(limits, clamp_zero), out)
        return

    target = TargetDesign(n_star, alpha, sidedness)
    if method == "simple-pois":
        limits = simple_poisson_pi(data.total_y, data.total_n, target)
        _emit_limits(_clamped(limits, clamp_zero), out)
        return
    if method == "qp":
        fit = fit_quasi_poisson(data)
        limits, err = quasi_poisson_pi(fit, target)
    else:
        fit = fit_neg_binomial(data)
        limits, err = neg_binomial_pi(fit, target, variant)
    extra = [("lambda_hat", fmt6(fit.lambda_hat)), ("dispersion", fmt6(fit.dispersion)),
             ("se", fmt6(err.se))]
    _emit_limits(_clamped(limits, clamp_zero), out, extra)


@main.command("calibrate")
@click.argument("data_file", type=click.Path())
@click.option("--model", type=click.Choice([MODEL_QP, MODEL_NB]), default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--n-star", type=float, default=None)
@click.option("--B", "n_boot", type=int, default=None, help="bootstrap samples (default 10000)")
@click.option("--tolerance", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--upper-only", is_flag=True, default=False)
@click.option("--clamp-zero", is_flag=True, default=False)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", default=None)
@_guarded
def calibrate_cmd(data_file, model, alpha, n_star, n_boot, tolerance, seed, upper_only,
                  clamp_zero, config_path, out) -> None:
    """Bootstrap-calibrate prediction limits for a dataset."""
    res = _Resolver(config_path)
    model = res.value(model, "model", str, MODEL_QP)
    alpha = res.value(alpha, "alpha", float, 0.05)
    n_boot = res.value(n_boot, "b", int, 10000)
    tolerance = res.value(tolerance, "tolerance", float, 0.001)
    seed = _require_seed(res.value(seed, "seed", int, None))
    upper_only = res.flag(upper_only, "upper_only")
    clamp_zero = res.flag(clamp_zero, "clamp_zero")
    data = read_dataset(data_file)
    n_star = res.value(n_star, "n_star", float, data.n_bar)
    target = TargetDesign(n_star, alpha, UPPER_ONLY if upper_only else TWO_SIDED)
    settings = CalibrationSettings(seed=RngState(seed), n_boot=n_boot, tolerance=tolerance)
    result = calibrated_pi(data, target, settings, model)
    limits = _clamped(result.limits, clamp_zero)
    low, high = limits.covered_counts
    q_l = "" if result.q_lower is None else fmt6(result.q_lower)
    psi_l = "" if result.achieved_psi_lower is None else fmt6(result.achieved_psi_lower)
    if out:
        _write_kv_csv(
            out,
            ["model", "alpha", "n_star", "B", "q_lower", "q_upper", "psi_lower", "psi_upper",
             "n_boot_used", "n_dropped", "lower", "upper", "covered_low", "covered_high"],
            [model, fmt6(alpha), fmt6(n_star), str(n_boot), q_l, fmt6(result.q_upper),
             psi_l, fmt6(result.achieved_psi_upper), str(result.n_boot_used),
             str(result.n_dropped),
             fmt6(limits.lower) if math.isfinite(limits.lower) else "-inf",
             fmt6(limits.upper),
             "" if low is None else str(low), "" if high is None else str(high)],
        )
    else:
        _echo_table([
            ("model", model),
            ("alpha", fmt6(alpha)),
            ("n_star", fmt6(n_star)),
            ("q_lower", q_l or "-"),
            ("q_upper", fmt6(result.q_upper)),
            ("psi_lower", psi_l or "-"),
            ("psi_upper", fmt6(result.achieved_psi_upper)),
            ("n_boot_used", str(result.n_boot_used)),
            ("n_dropped", str(result.n_dropped)),
            ("bisection converged", "yes" if result.bisection_converged else "no"),
            ("lower", _fmt2(limits.lower) if math.isfinite(limits.lower) else "-inf"),
            ("upper", _fmt2(limits.upper)),
            ("covered counts", f"{low} .. {high}"),
        ])


@main.command("sample")
@click.option("--model", type=click.Choice([MODEL_QP, MODEL_NB]), default=None)
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--phi", type=float, default=None)
@click.option("--kappa", type=float, default=None)
@click.option("--H", "n_clusters", type=int, default=None)
@click.option("--n", "offset", type=float, default=None, help="fixed offset per cluster")
@click.option("--offsets-uniform", default=None, metavar="LO,HI",
              help="draw offsets from Uniform(LO, HI)")
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", default=None)
@_guarded
def sample_cmd(model, lam, phi, kappa, n_clusters, offset, offsets_uniform, seed,
               config_path, out) -> None:
    """Generate an overdispersed count dataset as CSV."""
    res = _Resolver(config_path)
    model = res.value(model, "model", str, MODEL_QP)
    lam = res.value(lam, "lambda", float, None)
    phi = res.value(phi, "phi", float, None)
    kappa = res.value(kappa, "kappa", float, None)
    n_clusters = res.value(n_clusters, "h", int, None)
    offset = res.value(offset, "n", float, None)
    offsets_uniform = res.value(offsets_uniform, "offsets_uniform", str, None)
    seed = _require_seed(res.value(seed, "seed", int, None))
    if lam is None or n_clusters is None:
        raise ParameterError("--lambda and --H are required")
    state = RngState(seed)
    if offsets_uniform is not None:
        try:
            lo, hi = (float(v) for v in offsets_uniform.split(","))
        except ValueError:
            raise ParameterError(f"--offsets-uniform expects LO,HI, got {offsets_uniform!r}") from None
        design = sample_uniform_offsets(state, n_clusters, lo, hi)
    elif offset is not None:
        design = DesignSpec(np.full(n_clusters, offset))
    else:
        raise ParameterError("give either --n or --offsets-uniform")
    if model == MODEL_QP:
        if phi is None:
            raise ParameterError("--phi is required for the qp model")
        counts = sample_quasi_poisson(state, design, QuasiPoissonParams(lam, phi))
    else:
        if kappa is None:
            raise ParameterError("--kappa is required for the nb model")
        counts = sample_neg_binomial(state, design, NegBinParams(lam, kappa))
    data = HistoricalData(counts, design.offsets)
    stream, close = _open_out(out)
    try:
        write_dataset(stream, data)
    finally:
        if close:
            stream.close()


def _parse_list(raw: str, cast):
    return [cast(part.strip()) for part in raw.split(",") if part.strip()]


@main.command("simulate")
@click.option("--grid", "grid_path", type=click.Path(), required=True,
              help="flat key=value grid config")
@click.option("--seed", type=int, default=None)
@click.option("--S", "n_sims", type=int, default=None, help="replicates per cell")
@click.option("--B", "n_boot", type=int, default=None, help="bootstrap size for calibrated methods")
@click.option("--out", default=None)
@_guarded
def simulate_cmd(grid_path, seed, n_sims, n_boot, out) -> None:
    """Run a Monte-Carlo coverage grid and emit long-format CSV."""
    cfg = read_config(grid_path)

    def need(key: str) -> str:
        if key not in cfg:
            raise ParameterError(f"grid config is missing {key!r}")
        return cfg[key]

    generator = need("generator")
    methods = _parse_list(need("method"), str)
    for m in methods:
        if m not in SIM_METHODS:
            raise ParameterError(f"unknown method {m!r} in grid config")
    h_values = _parse_list(need("h"), int)
    lam_values = _parse_list(need("lambda"), float)
    phi_values = _parse_list(need("phi"), float)
    if "offset" in cfg:
        offset_lo = offset_hi = float(cfg["offset"])
    else:
        offset_lo = float(need("offset_lo"))
        offset_hi = float(need("offset_hi"))
    n_star_raw = cfg.get("n_star", "draw" if offset_lo != offset_hi else cfg.get("offset", "draw"))
    n_star = None if n_star_raw.strip().lower() == "draw" else float(n_star_raw)
    alpha = float(cfg.get("alpha", "0.05"))
    n_sims = n_sims if n_sims is not None else int(cfg.get("s", "500"))
    n_boot = n_boot if n_boot is not None else int(cfg.get("b", "2000"))
    k = float(cfg["k"]) if "k" in cfg else None
    sidedness = cfg.get("sidedness", TWO_SIDED).replace("-", "_")
    seed = seed if seed is not None else (int(cfg["seed"]) if "seed" in cfg else None)
    seed = _require_seed(seed)

    cells = cells_from_grid(
        generator, methods, h_values, lam_values, phi_values,
        offset_lo=offset_lo, offset_hi=offset_hi, n_star=n_star, alpha=alpha,
        n_sims=n_sims, n_boot=n_boot, k=k, sidedness=sidedness, seed=seed,
    )
    rows = run_grid(cells)
    stream, close = _open_out(out)
    try:
        write_grid_csv(rows, stream)
    finally:
        if close:
            stream.close()
    failures = [r for r in rows if r.report is None]
    if failures:
        click.echo(f"note: {len(failures)}/{len(rows)} cells failed", err=True)


def _chart_fit(data: HistoricalData, model: str) -> ModelFit:
    if model == MODEL_QP:
        return fit_quasi_poisson(data)
    fit = fit_neg_binomial(data)
    if not fit.converged:
        raise NumericalError("negative-binomial fit did not converge")
    return fit


@main.command("chart")
@click.argument("data_file", type=click.Path())
@click.option("--method", type=click.Choice(CHART_METHODS), default=None)
@click.option("--levels", default=None, help="comma list of coverages, default 0.95,0.99")
@click.option("--n-star", type=float, default=None)
@click.option("--B", "n_boot", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--upper-only", is_flag=True, default=False)
@click.option("--per-cluster-upl", is_flag=True, default=False,
              help="per-cluster upper limits at each cluster's own offset")
@click.option("--ref", "ref_file", type=click.Path(), default=None,
              help="estimate the model from this dataset instead")
@click.option("--title", default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", required=True, help="output SVG path; companion CSV sits next to it")
@_guarded
def chart_cmd(data_file, method, levels, n_star, n_boot, seed, upper_only, per_cluster_upl,
              ref_file, title, config_path, out) -> None:
    """Render a control chart (SVG + companion CSV) for a dataset."""
    res = _Resolver(config_path)
    method = res.value(method, "method", str, "calib-qp")
    if method not in CHART_METHODS:
        raise ParameterError(f"unknown method {method!r}")
    levels_raw = res.value(levels, "levels", str, "0.95,0.99")
    coverages = _parse_list(levels_raw, float)
    if not coverages or any(not 0.0 < c < 1.0 for c in coverages):
        raise ParameterError(f"levels must be coverages in (0,1), got {levels_raw!r}")
    coverages = sorted(coverages)
    n_boot = res.value(n_boot, "b", int, 10000)
    seed = res.value(seed, "seed", int, None)
    upper_only = res.flag(upper_only, "upper_only")
    per_cluster_upl = res.flag(per_cluster_upl, "per_cluster_upl")
    calibrated = method in ("calib-qp", "calib-nb")
    if calibrated:
        seed = _require_seed(seed)
    data = read_dataset(data_file)
    ref = read_dataset(ref_file) if ref_file else data
    n_star = res.value(n_star, "n_star", float, ref.n_bar)
    n = data.n_clusters

    bands: list[chartmod.ChartBand] = []
    if per_cluster_upl:
        if method in ("mean-sd", "c-chart", "u-chart", "laney"):
            raise ParameterError("--per-cluster-upl needs a model-based method")
        model = MODEL_QP if method in ("qp", "calib-qp") else MODEL_NB
        fit = _chart_fit(ref, model)
        center = fit.lambda_hat * data.offsets
        for li, cov in enumerate(coverages):
            alpha = 1.0 - cov
            upper = np.empty(n)
            cache: dict[float, float] = {}
            for i, n_h in enumerate(data.offsets):
                key = float(n_h)
                if key not in cache:
                    target = TargetDesign(key, alpha, UPPER_ONLY)
                    if calibrated:
                        settings = CalibrationSettings(
                            seed=RngState(seed, li), n_boot=n_boot)
                        cache[key] = calibrated_pi(ref, target, settings, model).limits.upper
                    elif method == "qp":
                        cache[key] = quasi_poisson_pi(fit, target)[0].upper
                    else:
                        cache[key] = neg_binomial_pi(fit, target)[0].upper
                upper[i] = cache[key]
            bands.append(chartmod.ChartBand.build(f"{cov*100:g}", upper, None, alpha, n))
    else:
        for li, cov in enumerate(coverages):
            alpha = 1.0 - cov
            sidedness = UPPER_ONLY if upper_only else TWO_SIDED
            if method in ("mean-sd", "c-chart", "u-chart", "laney"):
                k = normal_quantile(1.0 - alpha / 2.0)
                if method == "mean-sd":
                    lims = mean_sd_limits(ref, k)
                elif method == "c-chart":
                    lims = c_chart_limits(ref, k)
                elif method == "u-chart":
                    lims = u_chart_limits(ref, k, n_star)
                else:
                    lims = laney_u_chart_limits(ref, k, n_star)[0]
                scalefac = n_star if lims.scale == "per_offset_unit" else 1.0
                lower, upper = lims.lower * scalefac, lims.upper * scalefac
            else:
                target = TargetDesign(n_star, alpha, sidedness)
                if calibrated:
                    model = MODEL_QP if method == "calib-qp" else MODEL_NB
                    settings = CalibrationSettings(seed=RngState(seed, li), n_boot=n_boot)
                    lims = calibrated_pi(ref, target, settings, model).limits
                elif method == "qp":
                    lims = quasi_poisson_pi(_chart_fit(ref, MODEL_QP), target)[0]
                else:
                    lims = neg_binomial_pi(_chart_fit(ref, MODEL_NB), target)[0]
                lower, upper = lims.lower, lims.upper
            band_lower = None if (upper_only or not math.isfinite(lower)) else lower
            bands.append(chartmod.ChartBand.build(f"{cov*100:g}", upper, band_lower, alpha, n))
        if method in ("mean-sd", "c-chart"):
            center = np.full(n, float(ref.y.mean()))
        elif method in ("u-chart", "laney"):
            center = np.full(n, float((ref.y / ref.offsets).mean()) * n_star)
        else:
            center = np.full(n, _chart_fit(ref, MODEL_QP if method in ("qp", "calib-qp") else MODEL_NB).lambda_hat * n_star)

    svg_text, csv_text, result = chartmod.render_control_chart(
        data, center, bands, title=title or "")
    out_path = Path(out)
    out_path.write_text(svg_text)
    out_path.with_suffix(".csv").write_text(csv_text)
    pairs = [("points", str(result.n_points))]
    for band in bands:
        label = f"above-{band.label}"
        pairs.append((label, str(result.exceedances[label])))
        pairs.append((f"expected outside {band.label}%", _fmt2(result.expected[band.label])))
    _echo_table(pairs)


if __name__ == "__main__":
    main()
