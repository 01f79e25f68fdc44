"""Tests for realised covariation, bias terms and feasible ratios"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from exceptions import DegenerateDenominator, MissingVolatility, RegimeMismatch
from covariation import (
    bias_term,
    bias_weights,
    clt_statistic,
    correlation_ratio,
    realised_covariation,
    relative_covolatility,
    vech_pairs,
)
from scaling import tau_bar, tau_case1, tau_tilde_empirical, tau_tilde_theoretical
from simulate import GridSpec, PathBundle, ZeroDrift, constant_volatility, simulate_bss
from utils.stats import mean_and_se


class TestRealisedCovariation:

    def test_running_sum(self, random_bundle):
        tau = tau_tilde_empirical(random_bundle)
        cov = realised_covariation(random_bundle, tau)
        inc = random_bundle.increments / tau.values
        assert cov.pairs == [(1, 1), (2, 1), (2, 2)]
        assert cov.values[0].tolist() == [0.0, 0.0, 0.0]
        assert cov.values[-1][1] == pytest.approx(np.sum(inc[:, 0] * inc[:, 1]) / random_bundle.grid.n)
        # empirical factors normalize the terminal diagonal to T
        assert_allclose(cov.values[-1][[0, 2]], [random_bundle.grid.T] * 2, rtol=1e-12)

    def test_column_is_symmetric(self, random_bundle):
        cov = realised_covariation(random_bundle, tau_tilde_empirical(random_bundle))
        assert_array_equal(cov.column(1, 2), cov.column(2, 1))
        assert cov.to_frame().columns.tolist() == ["time", "(1,1)", "(2,1)", "(2,2)"]

    def test_resolution_mismatch(self, diagonal_spec, random_bundle):
        with pytest.raises(RegimeMismatch):
            realised_covariation(random_bundle, tau_case1(diagonal_spec, random_bundle.grid.n * 2))

    def test_variant_mismatch(self, diagonal_spec, small_grid):
        bundle = PathBundle(small_grid, np.ones((small_grid.N, 2)), ["X(1)", "X(2)"], {"variant": "X"})
        with pytest.raises(RegimeMismatch):
            realised_covariation(bundle, tau_bar(diagonal_spec, small_grid.n))

    def test_triple_scaling_rejected(self, diagonal_spec, random_bundle):
        with pytest.raises(RegimeMismatch):
            realised_covariation(random_bundle, tau_case1(diagonal_spec, random_bundle.grid.n, per_kernel=True))


class TestBias:

    def test_unit_volatility_gives_time(self, single_spec, small_grid):
        tau = tau_bar(single_spec, small_grid.n)
        bias = bias_term(single_spec, np.ones((1, 1)), tau, small_grid, "CaseII-bar")
        assert_allclose(bias.values[:, 0], small_grid.all_times, rtol=1e-12, atol=1e-15)
        limit = bias_term(single_spec, np.ones((1, 1)), tau, small_grid, "CaseII-bar", limit=True)
        assert_allclose(limit.values[:, 0], small_grid.all_times, rtol=1e-10, atol=1e-15)
        assert limit.weight_resolution == 2 ** 16

    def test_constant_volatility_scales_quadratically(self, single_spec, small_grid):
        tau = tau_bar(single_spec, small_grid.n)
        bias = bias_term(single_spec, np.full((1, 1), 3.0), tau, small_grid)
        assert bias.at(0.5)[0] == pytest.approx(4.5)

    def test_y_and_x_formulas_agree_on_diagonal_models(self, diagonal_spec, small_grid):
        sigma = np.diag([1.0, 2.0])
        tau = tau_tilde_theoretical(diagonal_spec, sigma ** 2, small_grid.n)
        y = bias_term(diagonal_spec, sigma, tau, small_grid, "CaseII-bar")
        x = bias_term(diagonal_spec, sigma, tau, small_grid, "CaseII-tilde")
        assert_allclose(y.values, x.values, rtol=1e-12, atol=1e-15)
        # tilde factors absorb the volatility: diagonal terms equal t
        assert_allclose(x.values[:, 0], small_grid.all_times, rtol=1e-12, atol=1e-15)
        assert_allclose(x.values[:, 1], 0.0)

    def test_weight_layouts(self, full_spec):
        tau = tau_bar(full_spec, 30)
        assert bias_weights(full_spec, tau, "CaseII-bar", 30).shape == (2, 2, 2, 2)
        assert bias_weights(full_spec, tau, "CaseII-tilde", 30).shape == (2, 2, 2)

    def test_missing_volatility(self, single_spec, small_grid, random_bundle):
        tau = tau_bar(single_spec, small_grid.n)
        with pytest.raises(MissingVolatility):
            bias_term(single_spec, None, tau, small_grid)
        with pytest.raises(MissingVolatility):
            bias_term(single_spec, random_bundle, tau, small_grid)

    def test_unknown_scenario(self, single_spec, small_grid):
        with pytest.raises(ValueError):
            bias_term(single_spec, np.ones((1, 1)), tau_bar(single_spec, small_grid.n), small_grid, "CaseIII")


class TestCLTStatistic:

    def test_centers_and_scales(self, single_spec, small_grid):
        paths = simulate_bss(single_spec, constant_volatility(1.0, 1), [ZeroDrift()], small_grid, seed=1)
        tau = tau_bar(single_spec, small_grid.n)
        cov = realised_covariation(paths[0], tau)
        bias = bias_term(single_spec, paths[0], tau, small_grid)
        stat = clt_statistic(cov, bias)
        assert stat.kind == "clt"
        assert_allclose(stat.values, np.sqrt(small_grid.n) * (cov.values - bias.values))
        with pytest.raises(RegimeMismatch):
            clt_statistic(stat, bias)

    def test_realised_covariation_is_unbiased(self, single_spec):
        grid = GridSpec(T=1.0, n=200)
        paths = simulate_bss(single_spec, constant_volatility(1.0, 1), [ZeroDrift()], grid, M=60, seed=2)
        tau = tau_bar(single_spec, grid.n)
        terminal = np.array([realised_covariation(b, tau).values[-1, 0] for b in paths])
        mean, se = mean_and_se(terminal)
        assert abs(mean - 1.0) <= 4.0 * se


class TestCorrelationRatio:

    def test_bounds_and_diagonal(self, random_bundle):
        ratio = correlation_ratio(random_bundle, epsilon=0.1)
        assert ratio.times[0] >= 0.1 - 1e-12
        assert_array_equal(ratio.column(1, 1), 1.0)
        assert np.all(np.abs(ratio.column(2, 1)) <= 1.0)

    def test_invariant_to_rescaling(self, random_bundle):
        base = correlation_ratio(random_bundle)
        scaled = correlation_ratio(random_bundle.scaled([8.0, 0.25]))
        assert_allclose(scaled.values, base.values, rtol=1e-12)

    def test_perfectly_correlated_components(self, small_grid):
        inc = np.random.default_rng(3).standard_normal(small_grid.N)
        bundle = PathBundle(small_grid, np.stack([inc, -2.0 * inc], axis=1), ["a", "b"], is_increments=True)
        assert_allclose(correlation_ratio(bundle).column(2, 1), -1.0)

    def test_degenerate_denominator(self, small_grid):
        values = np.zeros((small_grid.N, 2))
        values[:, 0] = np.arange(1, small_grid.N + 1)
        with pytest.raises(DegenerateDenominator):
            correlation_ratio(PathBundle(small_grid, values, ["a", "b"]))

    def test_epsilon_must_be_positive(self, random_bundle):
        with pytest.raises(ValueError):
            correlation_ratio(random_bundle, epsilon=0.0)


class TestRelativeCovolatility:

    def test_ends_at_one(self, random_bundle):
        rel = relative_covolatility(random_bundle)
        assert_array_equal(rel.values[-1], 1.0)
        assert_array_equal(rel.values[0], 0.0)
        assert rel.pairs == vech_pairs(2)

    def test_shorter_horizon(self, random_bundle):
        rel = relative_covolatility(random_bundle, T=0.5)
        assert rel.times[-1] == pytest.approx(0.5)
        assert_array_equal(rel.values[-1], 1.0)

    def test_diagonal_is_monotone(self, random_bundle):
        rel = relative_covolatility(random_bundle)
        assert np.all(np.diff(rel.column(1, 1)) >= 0.0)

    def test_horizon_outside_grid(self, random_bundle):
        with pytest.raises(ValueError):
            relative_covolatility(random_bundle, T=2.0)

    def test_zero_terminal(self, small_grid):
        values = np.zeros((small_grid.N, 1))
        with pytest.raises(DegenerateDenominator):
            relative_covolatility(PathBundle(small_grid, values, ["a"]))
