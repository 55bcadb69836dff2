"""Asymptotic prediction intervals: hand evaluations of the closed forms,
published golden rows, the variant switch, and width/limit invariants."""

import math

import pytest
from scipy.special import ndtri

from hclimits.errors import NumericalError, ParameterError
from hclimits.estimation import NEG_BINOMIAL, QUASI_POISSON, ModelFit
from hclimits.prediction import (
    TWO_SIDED,
    UPPER_ONLY,
    TargetDesign,
    neg_binomial_pi,
    neg_binomial_std_err,
    normal_quantile,
    quasi_poisson_pi,
    quasi_poisson_std_err,
    simple_poisson_pi,
)


def qp_fit(lam, phi, h, n_bar):
    return ModelFit(lam, QUASI_POISSON, phi, h, n_bar, True, 0)


def nb_fit(lam, kappa, h, n_bar, converged=True):
    return ModelFit(lam, NEG_BINOMIAL, kappa, h, n_bar, converged, 1)


TARONE_QP = qp_fit(8.35, 3.18, 66, 3.0)
TARONE_NB = nb_fit(8.35, 0.082, 66, 3.0)
T95 = TargetDesign(3.0, 0.05)


class TestNormalQuantile:
    def test_against_scipy_grid(self):
        ps = [1e-10, 1e-6, 0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999, 1 - 1e-6, 1 - 1e-10]
        for p in ps:
            assert abs(normal_quantile(p) - float(ndtri(p))) < 1e-9

    def test_key_quantiles(self):
        assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)
        assert normal_quantile(0.5) == 0.0
        assert normal_quantile(0.025) == pytest.approx(-normal_quantile(0.975), rel=1e-14)

    def test_domain(self):
        for p in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(ParameterError):
                normal_quantile(p)


class TestSimplePoisson:
    def test_hand_value(self):
        lim = simple_poisson_pi(100, 1.0, TargetDesign(1.0, 0.05))
        z = normal_quantile(0.975)
        half = z * math.sqrt(200.0)
        assert lim.lower == pytest.approx(100.0 - half, rel=1e-12)
        assert lim.upper == pytest.approx(100.0 + half, rel=1e-12)
        assert lim.lower == pytest.approx(72.28, abs=0.01)
        assert lim.upper == pytest.approx(127.72, abs=0.01)

    def test_zero_count_degenerate(self):
        lim = simple_poisson_pi(0, 2.0, TargetDesign(1.0, 0.05))
        assert (lim.lower, lim.upper) == (0.0, 0.0)
        assert lim.degenerate

    def test_variance_ratio_identity(self):
        # var_estimation / var_future = n*/n for any (n, n*)
        z = normal_quantile(0.975)
        for n, n_star in [(1.0, 1.0), (2.0, 5.0), (7.0, 0.5)]:
            lim = simple_poisson_pi(50, n, TargetDesign(n_star, 0.05))
            lam = 50.0 / n
            se2 = ((lim.upper - lim.lower) / (2.0 * z)) ** 2
            var_fut = n_star * lam
            var_est = se2 - var_fut
            assert var_est / var_fut == pytest.approx(n_star / n, rel=1e-9)


class TestQuasiPoissonPi:
    def test_tarone_golden(self):
        lim, err = quasi_poisson_pi(TARONE_QP, T95)
        assert lim.lower == pytest.approx(7.43, abs=0.05)
        assert lim.upper == pytest.approx(42.70, abs=0.05)
        assert lim.covered_counts == (8, 42)

    def test_hand_value(self):
        lim, err = quasi_poisson_pi(qp_fit(10.0, 2.0, 5, 1.0), TargetDesign(1.0, 0.05))
        se = math.sqrt(20.0 / 5.0 + 20.0)
        assert err.se == pytest.approx(se, rel=1e-12)
        assert lim.lower == pytest.approx(0.398, abs=0.001)
        assert lim.upper == pytest.approx(19.602, abs=0.001)

    def test_poisson_limit(self):
        # phi=1, huge H: interval converges to n* lam +/- z sqrt(n* lam)
        lim, _ = quasi_poisson_pi(qp_fit(10.0, 1.0, 10**9, 1.0), TargetDesign(1.0, 0.05))
        z = normal_quantile(0.975)
        assert lim.upper == pytest.approx(10.0 + z * math.sqrt(10.0), abs=1e-3)

    def test_phi_below_one_clamped_to_one(self):
        lim_low, err_low = quasi_poisson_pi(qp_fit(10.0, 0.4, 5, 1.0), TargetDesign(1.0, 0.05))
        lim_one, err_one = quasi_poisson_pi(qp_fit(10.0, 1.0, 5, 1.0), TargetDesign(1.0, 0.05))
        assert err_low.se == err_one.se
        assert lim_low.upper == lim_one.upper

    def test_upper_only_uses_one_sided_quantile(self):
        lim, err = quasi_poisson_pi(TARONE_QP, TargetDesign(3.0, 0.05, UPPER_ONLY))
        center = 3.0 * 8.35
        assert lim.lower == -math.inf
        assert lim.upper == pytest.approx(center + normal_quantile(0.95) * err.se, rel=1e-12)

    def test_variance_decomposition(self):
        err = quasi_poisson_std_err(TARONE_QP, T95)
        assert err.var_future == pytest.approx(3.18 * 3.0 * 8.35, rel=1e-12)
        assert err.var_estimation == pytest.approx(9.0 * 3.18 * 8.35 / (3.0 * 66), rel=1e-12)
        assert err.se**2 == pytest.approx(err.var_estimation + err.var_future, rel=1e-15)

    def test_width_increasing_in_phi(self):
        widths = []
        for phi in (1.0, 2.0, 4.0, 8.0):
            lim, _ = quasi_poisson_pi(qp_fit(10.0, phi, 20, 2.0), T95)
            widths.append(lim.upper - lim.lower)
        assert all(b > a for a, b in zip(widths, widths[1:]))

    def test_estimation_variance_vanishes_with_h(self):
        err = quasi_poisson_std_err(qp_fit(10.0, 2.0, 10**6, 1.0), TargetDesign(1.0, 0.05))
        assert err.var_estimation < 1e-4
        assert err.se == pytest.approx(math.sqrt(err.var_future), rel=1e-4)

    def test_wrong_model_rejected(self):
        with pytest.raises(ParameterError):
            quasi_poisson_pi(TARONE_NB, T95)


class TestNegBinomialPi:
    def test_tarone_golden_main_text(self):
        lim, _ = neg_binomial_pi(TARONE_NB, T95)
        assert lim.lower == pytest.approx(7.86, abs=0.05)
        assert lim.upper == pytest.approx(42.26, abs=0.05)
        assert lim.covered_counts == (8, 42)

    def test_supplement_variant_hand_value(self):
        # var(lam_hat) uses lam^2: spelled out with independent arithmetic
        lam, kap, h, n_bar, n_star = 8.35, 0.082, 66, 3.0, 3.0
        var_est = n_star**2 * (lam + kap * n_bar * lam**2) / (n_bar * h)
        var_fut = n_star * lam + kap * n_star**2 * lam**2
        z = normal_quantile(0.975)
        lim, err = neg_binomial_pi(TARONE_NB, T95, variant="supplement")
        assert err.var_estimation == pytest.approx(var_est, rel=1e-12)
        assert lim.lower == pytest.approx(n_star * lam - z * math.sqrt(var_est + var_fut), rel=1e-12)
        assert lim.lower == pytest.approx(7.78, abs=0.01)
        assert lim.upper == pytest.approx(42.32, abs=0.01)

    def test_variants_differ(self):
        main, _ = neg_binomial_pi(TARONE_NB, T95, variant="main-text")
        supp, _ = neg_binomial_pi(TARONE_NB, T95, variant="supplement")
        assert supp.upper > main.upper

    def test_kappa_zero_collapses_to_poisson_structure(self):
        fit = nb_fit(8.0, 0.0, 20, 2.0)
        err = neg_binomial_std_err(fit, TargetDesign(2.0, 0.05))
        assert err.var_estimation == pytest.approx(4.0 * 8.0 / (2.0 * 20), rel=1e-12)
        assert err.var_future == pytest.approx(2.0 * 8.0, rel=1e-12)

    def test_variance_decomposition(self):
        err = neg_binomial_std_err(TARONE_NB, T95)
        n_star, lam, kap = 3.0, 8.35, 0.082
        assert err.var_future == pytest.approx(n_star * lam * (1 + kap * n_star * lam), rel=1e-12)

    def test_width_increasing_in_kappa(self):
        widths = []
        for kap in (0.0, 0.05, 0.1, 0.5):
            lim, _ = neg_binomial_pi(nb_fit(10.0, kap, 20, 2.0), T95)
            widths.append(lim.upper - lim.lower)
        assert all(b > a for a, b in zip(widths, widths[1:]))

    def test_negative_kappa_rejected(self):
        with pytest.raises(ParameterError):
            neg_binomial_pi(nb_fit(10.0, -0.01, 20, 2.0), T95)

    def test_non_converged_rejected(self):
        with pytest.raises(NumericalError):
            neg_binomial_pi(nb_fit(10.0, 0.1, 20, 2.0, converged=False), T95)

    def test_unknown_variant(self):
        with pytest.raises(ParameterError):
            neg_binomial_pi(TARONE_NB, T95, variant="nonsense")


class TestTargetDesign:
    def test_validation(self):
        with pytest.raises(ParameterError):
            TargetDesign(0.0, 0.05)
        with pytest.raises(ParameterError):
            TargetDesign(1.0, 0.0)
        with pytest.raises(ParameterError):
            TargetDesign(1.0, 1.0)
        with pytest.raises(ParameterError):
            TargetDesign(1.0, 0.05, "sideways")
        assert TargetDesign(1.0, 0.05, TWO_SIDED).z == pytest.approx(1.959964, abs=1e-6)

    def test_symmetry_about_center(self):
        lim, _ = quasi_poisson_pi(TARONE_QP, T95)
        center = 3.0 * 8.35
        assert lim.upper - center == pytest.approx(center - lim.lower, rel=1e-12)
