"""Model-fit checks: closed forms by hand, brute-force Pearson cross-check,
large-sample parameter recovery, and solver invariants."""

import numpy as np
import pytest

from hclimits.errors import NumericalError, ParameterError
from hclimits.estimation import (
    HistoricalData,
    fit_neg_binomial,
    fit_quasi_poisson,
    nb_log_likelihood,
)
from hclimits.rng import RngState
from hclimits.sampling import DesignSpec, NegBinParams, sample_neg_binomial


def brute_force_pearson(y, n):
    """Independently coded Pearson dispersion: plain Python loop arithmetic."""
    lam = sum(y) / sum(n)
    total = 0.0
    for yi, ni in zip(y, n):
        mu = ni * lam
        total += (yi - mu) ** 2 / mu
    return total / (len(y) - 1)


class TestQuasiPoisson:
    def test_zero_residuals(self):
        fit = fit_quasi_poisson(HistoricalData([6, 6, 6], [3, 3, 3]))
        assert fit.lambda_hat == 2.0
        assert fit.phi_hat == 0.0
        assert fit.converged

    def test_hand_pearson(self):
        fit = fit_quasi_poisson(HistoricalData([5, 15], [1, 1]))
        assert fit.lambda_hat == 10.0
        assert fit.phi_hat == pytest.approx(5.0, abs=1e-12)

    def test_fitted_means_equal_observations(self):
        fit = fit_quasi_poisson(HistoricalData([10, 20, 30], [1, 2, 3]))
        assert fit.lambda_hat == 10.0
        assert fit.phi_hat == pytest.approx(0.0, abs=1e-12)

    def test_lambda_is_closed_form_bit_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            h = int(rng.integers(2, 30))
            y = rng.integers(0, 60, size=h)
            if y.sum() == 0:
                y[0] = 1
            n = rng.uniform(0.5, 5.0, size=h)
            fit = fit_quasi_poisson(HistoricalData(y, n))
            assert fit.lambda_hat == y.sum() / n.sum()

    def test_pearson_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            h = int(rng.integers(2, 40))
            y = rng.integers(0, 80, size=h)
            if y.sum() == 0:
                y[0] = 3
            n = rng.uniform(0.5, 5.0, size=h)
            fit = fit_quasi_poisson(HistoricalData(y, n))
            assert fit.phi_hat == pytest.approx(brute_force_pearson(list(y), list(n)), abs=1e-12)

    def test_reorder_invariance(self):
        y = [3, 9, 27, 5, 12]
        n = [1.0, 2.0, 3.0, 1.5, 2.5]
        a = fit_quasi_poisson(HistoricalData(y, n))
        b = fit_quasi_poisson(HistoricalData(y[::-1], n[::-1]))
        assert a.phi_hat == pytest.approx(b.phi_hat, rel=1e-14)

    def test_all_zero_sample(self):
        with pytest.raises(NumericalError, match="all-zero"):
            fit_quasi_poisson(HistoricalData([0, 0, 0], [1, 1, 1]))

    def test_single_cluster_rejected(self):
        with pytest.raises(ParameterError):
            fit_quasi_poisson(HistoricalData([5], [1]))

    def test_phi_below_one_reported_raw(self):
        # underdispersed sample: phi_hat < 1 must come through unclamped
        fit = fit_quasi_poisson(HistoricalData([10, 10, 10, 11], [1, 1, 1, 1]))
        assert 0.0 < fit.phi_hat < 1.0


class TestNegBinomial:
    def test_poisson_boundary(self):
        # sample variance equals the mean: kappa driven to the boundary
        fit = fit_neg_binomial(HistoricalData([4, 4, 4, 4], [1, 1, 1, 1]))
        assert fit.converged
        assert abs(fit.kappa_hat) < 1e-4

    def test_consistency_on_simulated_data(self):
        lam, kappa = 5.0, 0.2
        design = DesignSpec(np.full(10_000, 3.0))
        y = sample_neg_binomial(RngState(23), design, NegBinParams(lam, kappa))
        fit = fit_neg_binomial(HistoricalData(y, design.offsets))
        assert fit.converged
        assert fit.lambda_hat == pytest.approx(lam, abs=0.1)
        assert fit.kappa_hat == pytest.approx(kappa, abs=0.02)

    def test_all_zero_sample(self):
        with pytest.raises(NumericalError, match="all-zero"):
            fit_neg_binomial(HistoricalData([0, 0, 0], [1, 1, 1]))

    def test_equal_offsets_lambda_matches_closed_form(self):
        y = [12, 30, 19, 25, 41]
        n = [3.0] * 5
        fit = fit_neg_binomial(HistoricalData(y, n))
        assert fit.lambda_hat == pytest.approx(sum(y) / sum(n), rel=1e-9)

    def test_loglik_monotone_ascent(self):
        y = [3, 19, 7, 31, 12, 9, 44, 2]
        n = [1.0, 2.0, 1.0, 3.0, 2.0, 1.0, 3.5, 0.5]
        fit = fit_neg_binomial(HistoricalData(y, n))
        trace = np.array(fit.loglik_trace)
        assert np.all(np.diff(trace) >= -1e-10)

    def test_loglik_maximized_vs_grid(self):
        # coarse brute-force scan of the likelihood surface cannot beat the fit
        y = np.array([3, 19, 7, 31, 12, 9, 44, 2])
        n = np.array([1.0, 2.0, 1.0, 3.0, 2.0, 1.0, 3.5, 0.5])
        fit = fit_neg_binomial(HistoricalData(y, n))
        best = nb_log_likelihood(y.astype(float), n, fit.lambda_hat, 1.0 / fit.kappa_hat)
        for lam in np.linspace(0.5 * fit.lambda_hat, 2.0 * fit.lambda_hat, 21):
            for theta in np.geomspace(0.2, 50.0, 21):
                assert nb_log_likelihood(y.astype(float), n, lam, theta) <= best + 1e-6


class TestHistoricalData:
    def test_derived_quantities(self, tarone):
        assert tarone.n_clusters == 66
        assert tarone.total_n == pytest.approx(198.0)
        assert tarone.total_y == 1654
        assert tarone.n_bar == pytest.approx(3.0)

    def test_validation(self):
        with pytest.raises(ParameterError):
            HistoricalData([1.5], [1.0])
        with pytest.raises(ParameterError):
            HistoricalData([-1], [1.0])
        with pytest.raises(ParameterError):
            HistoricalData([1, 2], [1.0])
        with pytest.raises(ParameterError):
            HistoricalData([1, 2], [1.0, 0.0])
