"""Heuristic chart limits: hand computations, published golden rows on the
historical-control fixture, and structural invariants."""

import math

import numpy as np
import pytest

from hclimits.errors import NumericalError, ParameterError
from hclimits.estimation import HistoricalData
from hclimits.heuristics import (
    c_chart_limits,
    laney_u_chart_limits,
    mean_sd_limits,
    u_chart_limits,
)


class TestMeanSd:
    def test_zero_sd(self):
        lim = mean_sd_limits(HistoricalData([10, 10, 10], [2, 2, 2]), k=2.0)
        assert (lim.lower, lim.upper) == (10.0, 10.0)
        assert lim.covered_counts == (10, 10)

    def test_hand_sd(self):
        # SD of [5, 15] is sqrt(50) = 7.0710678...; raw negative lower kept
        lim = mean_sd_limits(HistoricalData([5, 15], [1, 1]), k=2.0)
        sd = math.sqrt(50.0)
        assert lim.lower == pytest.approx(10.0 - 2 * sd, abs=1e-12)
        assert lim.upper == pytest.approx(10.0 + 2 * sd, abs=1e-12)
        assert lim.covered_counts == (-4, 24)

    def test_unequal_offsets_rejected(self):
        with pytest.raises(ParameterError):
            mean_sd_limits(HistoricalData([5, 15], [1, 2]), k=2.0)

    def test_tarone_golden(self, tarone):
        lim = mean_sd_limits(tarone, k=2.0)
        assert lim.lower == pytest.approx(7.20, abs=0.01)
        assert lim.upper == pytest.approx(42.92, abs=0.01)
        assert lim.covered_counts == (8, 42)


class TestCChart:
    def test_tarone_golden(self, tarone):
        lim = c_chart_limits(tarone, k=1.96)
        assert lim.lower == pytest.approx(15.25, abs=0.01)
        assert lim.upper == pytest.approx(34.87, abs=0.01)
        assert lim.covered_counts == (16, 34)

    def test_zero_mean(self):
        lim = c_chart_limits(HistoricalData([0, 0], [1, 1]), k=2.0)
        assert (lim.lower, lim.upper) == (0.0, 0.0)

    def test_hand_value(self):
        lim = c_chart_limits(HistoricalData([100, 100], [1, 1]), k=3.0)
        assert (lim.lower, lim.upper) == (70.0, 130.0)


class TestUChart:
    def test_tarone_golden(self, tarone):
        lim = u_chart_limits(tarone, k=1.96, n_star=3.0)
        assert lim.lower == pytest.approx(5.08, abs=0.01)
        assert lim.upper == pytest.approx(11.62, abs=0.01)
        assert lim.covered_counts == (6, 11)
        assert lim.scale == "per_offset_unit"

    def test_zero_rate(self):
        lim = u_chart_limits(HistoricalData([0, 0], [1, 2]), k=2.0, n_star=1.0)
        assert (lim.lower, lim.upper) == (0.0, 0.0)

    def test_hand_value(self):
        lim = u_chart_limits(HistoricalData([4, 4], [1, 1]), k=2.0, n_star=1.0)
        assert (lim.lower, lim.upper) == (0.0, 8.0)

    def test_scale_equivariance_with_c_chart(self):
        # equal offsets n and n* = n: u-chart == c-chart / n
        data = HistoricalData([12, 30, 19, 25], [3, 3, 3, 3])
        u = u_chart_limits(data, k=1.96, n_star=3.0)
        c = c_chart_limits(data, k=1.96)
        assert u.lower == pytest.approx(c.lower / 3.0, rel=1e-12)
        assert u.upper == pytest.approx(c.upper / 3.0, rel=1e-12)


class TestLaney:
    def test_tarone_golden(self, tarone):
        lim, stats = laney_u_chart_limits(tarone, k=1.96, n_star=3.0)
        assert lim.lower == pytest.approx(2.56, abs=0.01)
        assert lim.upper == pytest.approx(14.14, abs=0.01)
        assert lim.covered_counts == (3, 14)
        assert stats.sigma_z > 1.0  # overdispersed data

    def test_all_rates_equal_collapses(self):
        lim, stats = laney_u_chart_limits(HistoricalData([6, 6, 6], [2, 2, 2]), 1.96, 2.0)
        assert stats.sigma_z == 0.0
        assert lim.lower == lim.upper == 3.0

    def test_hand_two_cluster_oracle(self):
        # u = [1, 3], n = [1, 1]: u_bar=2, z_h = (u_h-2)/sqrt(2), z_bar=0,
        # sigma_z = sqrt((0.5+0.5)/2) = 1/sqrt(2)
        data = HistoricalData([1, 3], [1, 1])
        k, n_star = 1.7, 1.3
        lim, stats = laney_u_chart_limits(data, k=k, n_star=n_star)
        sigma_z = 1.0 / math.sqrt(2.0)
        assert stats.sigma_z == pytest.approx(sigma_z, rel=1e-12)
        half = k * math.sqrt(2.0 / n_star) * sigma_z
        assert lim.lower == pytest.approx(2.0 - half, rel=1e-12)
        assert lim.upper == pytest.approx(2.0 + half, rel=1e-12)

    def test_zero_mean_rate_errors(self):
        with pytest.raises(NumericalError, match="zero mean rate"):
            laney_u_chart_limits(HistoricalData([0, 0], [1, 1]), 1.96, 1.0)

    def test_laney_is_u_chart_scaled_by_sigma_z(self, tarone):
        u = u_chart_limits(tarone, k=1.96, n_star=3.0)
        laney, stats = laney_u_chart_limits(tarone, k=1.96, n_star=3.0)
        u_bar = stats.u_bar
        assert laney.upper - u_bar == pytest.approx((u.upper - u_bar) * stats.sigma_z, rel=1e-12)
        assert stats.sigma_z >= 0.0


class TestSymmetry:
    @pytest.mark.parametrize("k", [1.0, 1.96, 3.0])
    def test_all_methods_symmetric_about_center(self, tarone, k):
        y_bar = float(tarone.y.mean())
        u_bar = float((tarone.y / tarone.offsets).mean())
        for lim, center in [
            (mean_sd_limits(tarone, k), y_bar),
            (c_chart_limits(tarone, k), y_bar),
            (u_chart_limits(tarone, k, 3.0), u_bar),
            (laney_u_chart_limits(tarone, k, 3.0)[0], u_bar),
        ]:
            assert lim.upper - center == pytest.approx(center - lim.lower, rel=1e-12)
