"""Historical control limits for overdispersed count data.

Heuristic Sheward-chart limits, asymptotic quasi-Poisson and
negative-binomial prediction intervals, bootstrap-calibrated equal-tail
limits, and a Monte-Carlo harness for their coverage probabilities.
"""

from .calibration import (
    MODEL_NB,
    MODEL_QP,
    BisectionOutcome,
    BootstrapReplicates,
    CalibrationResult,
    CalibrationSettings,
    bisect_coefficient,
    bootstrap_replicates,
    calibrated_pi,
)
from .chart import ChartBand, ChartResult, expected_exceedance, render_control_chart
from .coverage import CoverageReport, SimCell, run_cell, run_grid
from .dataio import read_config, read_dataset, write_dataset
from .errors import DataError, HclimitsError, NumericalError, ParameterError
from .estimation import (
    HistoricalData,
    ModelFit,
    fit_neg_binomial,
    fit_quasi_poisson,
)
from .heuristics import (
    PredictionLimits,
    UChartStats,
    c_chart_limits,
    laney_u_chart_limits,
    mean_sd_limits,
    u_chart_limits,
)
from .prediction import (
    PredictionStdErr,
    TargetDesign,
    neg_binomial_pi,
    normal_quantile,
    quasi_poisson_pi,
    simple_poisson_pi,
)
from .rng import GammaParams, RngState, gamma_sample, poisson_sample
from .sampling import (
    DesignSpec,
    NegBinParams,
    QuasiPoissonParams,
    sample_neg_binomial,
    sample_quasi_poisson,
    sample_uniform_offsets,
)

__version__ = "0.1.0"
