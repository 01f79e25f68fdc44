"""Tests for gamma kernels, cross-moments and increment correlations"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from exceptions import DomainError, InsufficientLags, InvalidModel, SeriesDiverged
from kernel import (
    GammaKernel,
    KernelSpec,
    check_assumption_pi_decay,
    check_assumption_squared_correlations,
    component_increment_covariance,
    core_family,
    correlation_table,
    cross_check,
    cross_moment,
    cross_moment_closed_form,
    cross_moment_series,
    family_variances,
    increment_correlation,
    increment_covariance,
    increment_profile,
    limiting_correlation,
    limiting_correlations,
    series_constants,
    series_numerator,
)


class TestGammaKernel:

    def test_zero_for_non_positive_times(self):
        g = GammaKernel(0.25, 1.0)
        assert_array_equal(g(np.array([-1.0, 0.0])), [0.0, 0.0])
        assert g.scalar(0.0) == 0.0

    def test_matches_formula(self):
        g = GammaKernel(-0.25, 2.0)
        t = np.array([0.1, 1.0, 3.0])
        assert_allclose(g(t), t ** -0.25 * np.exp(-2.0 * t), rtol=1e-15)
        assert g.scalar(1.0) == pytest.approx(math.exp(-2.0))

    @pytest.mark.parametrize("delta, lam", [(0.1, 0.0), (0.1, -1.0), (-0.5, 1.0), (-0.7, 1.0), (float("nan"), 1.0)])
    def test_invalid_parameters(self, delta, lam):
        with pytest.raises(InvalidModel):
            GammaKernel(delta, lam)

    def test_dict_uses_lambda_key(self):
        g = GammaKernel.from_dict({"delta": 0.1, "lambda": 2.0})
        assert g == GammaKernel(0.1, 2.0)
        assert g.to_dict() == {"delta": 0.1, "lambda": 2.0}
        with pytest.raises(InvalidModel):
            GammaKernel.from_dict({"delta": 0.1})


class TestKernelSpec:

    def test_diagonal_grid_has_null_cells(self):
        spec = KernelSpec.uniform(3, 0.1, 1.0, diagonal=True)
        assert spec.kernel(0, 1) is None
        assert spec.kernel(2, 2) == GammaKernel(0.1, 1.0)
        assert spec.deltas == [0.1, 0.1, 0.1]

    def test_rejects_empty_and_ragged_grids(self):
        with pytest.raises(InvalidModel):
            KernelSpec(1, ((None,),))
        with pytest.raises(InvalidModel):
            KernelSpec(2, ((GammaKernel(0.1, 1.0),), (None, None)))

    def test_from_dict_round_trip(self, full_spec):
        again = KernelSpec.from_dict(full_spec.to_dict())
        assert again == full_spec
        assert again.min_lambda == 1.0

    def test_from_dict_null_cell(self):
        spec = KernelSpec.from_dict({"p": 2, "kernels": [[{"delta": 0.1, "lambda": 1}, None],
                                                          [None, {"delta": 0.2, "lambda": 1}]]})
        assert spec.kernel(1, 0) is None


class TestCrossMoments:

    def test_exponential_kernels(self):
        g = GammaKernel(0.0, 1.0)
        assert cross_moment(g, g, 0.0) == pytest.approx(0.5, rel=1e-10)
        assert cross_moment(g, g, 0.3) == pytest.approx(0.5 * math.exp(-0.3), rel=1e-10)

    def test_closed_form_binomial_branch(self):
        g = GammaKernel(0.0, 1.0)
        h = np.array([0.0, 0.3, 2.0])
        assert_allclose(cross_moment_closed_form(g, g, h), 0.5 * np.exp(-h), rtol=1e-13)

    def test_series_pole_at_integer_exponent_sum(self):
        g = GammaKernel(0.0, 1.0)
        with pytest.raises(SeriesDiverged):
            series_constants(g, g)

    def test_negative_lag_rejected(self):
        g = GammaKernel(0.1, 1.0)
        with pytest.raises(DomainError):
            cross_moment(g, g, -0.1)
        with pytest.raises(DomainError):
            cross_moment_series(g, g, [-0.1])

    @pytest.mark.parametrize("delta", [-0.2, 0.1, 0.3])
    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_series_agrees_with_quadrature(self, delta, lam):
        ki = GammaKernel(delta, lam)
        kj = GammaKernel(0.15, 1.0)
        for h in (0.001, 0.01, 0.1, 0.5, 1.0):
            result = cross_check(ki, kj, h)
            assert result["relative_gap"] <= 1e-8, (delta, lam, h, result)

    def test_closed_form_agrees_with_quadrature(self):
        ki, kj = GammaKernel(0.3, 1.0), GammaKernel(-0.2, 0.5)
        for h in (0.0, 0.05, 0.7):
            assert cross_moment_closed_form(ki, kj, h)[0] == pytest.approx(cross_moment(ki, kj, h), rel=1e-6)


class TestIncrementCovariance:

    def test_brownian_increment_variance(self):
        # delta = 0 and tiny lambda: increments of int e^{-lam(t-s)} dW have variance close to 1/n
        g = GammaKernel(0.0, 1e-3)
        assert increment_covariance(g, g, 100, 0) == pytest.approx(0.01, rel=1e-3)

    def test_negative_lag_swaps_kernels(self):
        ka, kb = GammaKernel(0.1, 1.0), GammaKernel(0.3, 2.0)
        assert increment_covariance(ka, kb, 50, -2) == increment_covariance(kb, ka, 50, 2)

    @pytest.mark.parametrize("method", ["series", "closed", "auto"])
    def test_profile_methods_agree(self, method):
        ka, kb = GammaKernel(0.1, 1.0), GammaKernel(0.3, 2.0)
        reference = increment_profile(ka, kb, 64, 6, method="quadrature")
        assert_allclose(increment_profile(ka, kb, 64, 6, method=method), reference, rtol=1e-5, atol=1e-14)

    @pytest.mark.parametrize("delta", [-0.25, 0.0, 0.25])
    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("k", [0, 1, 2, 5, 10])
    def test_series_numerator_matches_quadrature(self, delta, lam, k):
        spec = KernelSpec.uniform(1, delta, lam)
        n = 20
        direct = component_increment_covariance(spec, n, 0, 0, k)
        variance = component_increment_covariance(spec, n, 0, 0, 0)
        # the second difference at spacing 1/n amplifies cross-moment errors, so the series runs tighter
        value = series_numerator(spec, n, 0, 0, k, rtol=1e-13)
        assert value == pytest.approx(direct, rel=1e-8, abs=1e-9 * variance)

    def test_series_numerator_cross_component(self, full_spec):
        # the (0.1, -0.1) pair sits on the series pole and goes through the confluent closed form
        for k in range(4):
            direct = component_increment_covariance(full_spec, 64, 0, 1, k)
            assert series_numerator(full_spec, 64, 0, 1, k) == pytest.approx(direct, rel=1e-5)

    def test_series_numerator_without_fallback(self):
        spec = KernelSpec.uniform(1, 0.25, 1.0)
        # all three lags are non-negative for k >= 1
        assert np.isfinite(series_numerator(spec, 100, 0, 0, 2, fallback=False))
        assert cross_moment_series(GammaKernel(0.25, 1.0), GammaKernel(0.1, 1.0), []).size == 0

    def test_unknown_method(self):
        g = GammaKernel(0.1, 1.0)
        with pytest.raises(ValueError):
            increment_profile(g, g, 10, 2, method="spline")


class TestCorrelations:

    def test_lag_zero_is_one(self, full_spec):
        assert increment_correlation(full_spec, 100, 1, 1, 0) == 1.0

    def test_correlation_bounded(self, full_spec):
        for k in range(5):
            assert abs(increment_correlation(full_spec, 100, 0, 1, k)) <= 1.0

    def test_limit_formula(self):
        assert limiting_correlation(0.25, 0) == 1.0
        assert limiting_correlation(0.25, 1) == pytest.approx(0.5 * (2 ** 1.5 - 2.0))
        assert_allclose(limiting_correlations(0.25, 5)[1:],
                        [limiting_correlation(0.25, k) for k in range(1, 6)], rtol=1e-14)

    def test_brownian_limit_is_exactly_zero(self):
        assert all(limiting_correlation(0.0, k) == 0.0 for k in range(1, 50))
        assert_array_equal(limiting_correlations(0.0, 49)[1:], np.zeros(49))

    @pytest.mark.parametrize("delta", [-0.5, 0.5, 0.6])
    def test_limit_domain(self, delta):
        with pytest.raises(DomainError):
            limiting_correlation(delta, 1)

    @pytest.mark.parametrize("delta", [-0.25, 0.1, 0.25])
    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_converges_to_limit(self, delta, lam):
        spec = KernelSpec.uniform(1, delta, lam)
        r = correlation_table(core_family(spec), 2 ** 14, 20).as_array()[0, 0]
        assert np.max(np.abs(r[1:] - limiting_correlations(delta, 20)[1:])) < 1e-2

    @pytest.mark.slow
    @pytest.mark.parametrize("delta", [-0.25, 0.1, 0.25, 0.4])
    def test_error_decreases_in_n(self, delta):
        spec = KernelSpec.uniform(1, delta, 1.0)
        limit = limiting_correlations(delta, 20)
        errors = []
        for j in range(8, 15):
            r = correlation_table(core_family(spec), 2 ** j, 20).as_array()[0, 0]
            errors.append(np.max(np.abs(r[1:] - limit[1:])))
        assert np.all(np.diff(errors) < 0.0), errors


class TestCoreFamilies:

    @pytest.mark.parametrize("target, size", [("component", 2), ("triple", 8), ("pair", 4), ("kernel", 4)])
    def test_family_sizes(self, full_spec, target, size):
        assert core_family(full_spec, target).size == size

    def test_triple_labels_are_one_based(self, full_spec):
        family = core_family(full_spec, "triple")
        assert family.labels[0] == (1, 1, 1)
        assert family.labels[-1] == (2, 2, 2)

    def test_unknown_target(self, full_spec):
        with pytest.raises(ValueError):
            core_family(full_spec, "quad")

    def test_component_variance_sums_kernels(self, full_spec):
        var = family_variances(core_family(full_spec), 50)
        expected = increment_covariance(full_spec.kernel(0, 0), full_spec.kernel(0, 0), 50, 0) + \
            increment_covariance(full_spec.kernel(0, 1), full_spec.kernel(0, 1), 50, 0)
        assert var[0] == pytest.approx(expected, rel=1e-12)

    def test_independent_components_do_not_correlate(self, diagonal_spec):
        table = correlation_table(core_family(diagonal_spec), 100, 5)
        assert_array_equal(table.entries[((1,), (2,))], np.zeros(6))
        assert table.value((1,), (1,), 0) == 1.0
        assert table.max_lag == 5


class TestAssumptionChecks:

    def test_rough_kernel_passes_squared_check(self):
        spec = KernelSpec.uniform(1, -0.25, 1.0)
        table = correlation_table(core_family(spec), 1024, 100)
        result = check_assumption_squared_correlations(table, 100)
        assert result["verdict"] == "pass"
        assert result["heuristic"] is True

    def test_too_few_lags(self, single_spec):
        table = correlation_table(core_family(single_spec), 256, 5)
        with pytest.raises(InsufficientLags):
            check_assumption_squared_correlations(table, 5)

    def test_pi_decay_rough_kernel(self):
        result = check_assumption_pi_decay(GammaKernel(-0.25, 1.0), [256, 1024, 4096], [0.5])
        assert result["verdict"] == "pass"
        assert result["records"][0]["fitted_lambda"] < -1.0

    def test_pi_decay_smooth_kernel_warns(self):
        # fitted lambda tends to 2 delta - 1, above -1 for delta >= 0
        result = check_assumption_pi_decay(GammaKernel(0.25, 1.0), [256, 1024, 4096], [0.5])
        assert result["verdict"] == "warn"
        assert -1.0 < result["records"][0]["fitted_lambda"] < 0.0

    def test_pi_decay_kappa_domain(self):
        with pytest.raises(DomainError):
            check_assumption_pi_decay(GammaKernel(0.1, 1.0), [64, 128], [1.0])
