"""Tests for quadrature, random substreams and Monte Carlo statistics"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from exceptions import NonConvergent
from utils.quadrature import integrate_panel, integrate_panels, tail_cutoff
from utils.rng import STREAM_BROWNIAN, STREAM_VOLATILITY, substream
from utils.stats import (
    bootstrap_covariance_se,
    covariance_and_se,
    jarque_bera_pvalues,
    mean_and_se,
    passes_normality,
    z_score,
)


class TestQuadrature:

    def test_endpoint_singularity(self):
        value, _ = integrate_panel(lambda x: x ** -0.5, 0.0, 1.0, singular_exponent=-0.5)
        assert value == pytest.approx(2.0, rel=1e-10)

    def test_plain_panel(self):
        value, _ = integrate_panel(math.exp, 0.0, 1.0)
        assert value == pytest.approx(math.e - 1.0, rel=1e-12)

    def test_empty_panel(self):
        assert integrate_panel(math.exp, 1.0, 1.0) == (0.0, 0.0)

    def test_panels_sum(self):
        f = lambda x: x ** -0.5 * math.exp(-x)
        total = integrate_panels(f, [(0.0, 1.0, -0.5), (1.0, tail_cutoff(1.0, 1.0), 0.0)])
        assert total == pytest.approx(math.sqrt(math.pi), rel=1e-9)

    def test_divergent_integral(self):
        with pytest.raises(NonConvergent):
            integrate_panels(lambda x: 1.0 / x if x > 0 else 0.0, [(0.0, 1.0, 0.0)])

    def test_error_above_rtol_is_rejected(self, monkeypatch):
        # 50x the requested relative tolerance on a single panel
        monkeypatch.setattr("utils.quadrature.integrate_panel", lambda *a, **k: (1.0, 5e-9))
        with pytest.raises(NonConvergent):
            integrate_panels(math.exp, [(0.0, 1.0, 0.0)], rtol=1e-10)

    def test_cancelling_panels_warn(self, monkeypatch, caplog):
        results = iter([(1.0, 0.9e-10), (-0.999, 0.9e-10)])
        monkeypatch.setattr("utils.quadrature.integrate_panel", lambda *a, **k: next(results))
        with caplog.at_level("WARNING", logger="utils.quadrature"):
            total = integrate_panels(math.exp, [(0.0, 1.0, 0.0), (1.0, 2.0, 0.0)], rtol=1e-10)
        assert total == pytest.approx(1e-3)
        assert "panels cancel" in caplog.text

    def test_tail_cutoff(self):
        x = tail_cutoff(2.0, 1.0)
        assert math.exp(-2.0 * (x - 1.0)) == pytest.approx(1e-16, rel=1e-6)
        assert tail_cutoff(2.0, 1.0, growth=1.0) > x


class TestSubstream:

    def test_reproducible(self):
        assert_array_equal(substream(5, 3).standard_normal(8), substream(5, 3).standard_normal(8))

    def test_keys_separate_streams(self):
        base = substream(5, 3, STREAM_BROWNIAN).standard_normal(8)
        assert not np.array_equal(base, substream(5, 4, STREAM_BROWNIAN).standard_normal(8))
        assert not np.array_equal(base, substream(5, 3, STREAM_VOLATILITY).standard_normal(8))
        assert not np.array_equal(base, substream(6, 3, STREAM_BROWNIAN).standard_normal(8))
        assert not np.array_equal(substream(5, 3, STREAM_BROWNIAN, 0).standard_normal(8),
                                  substream(5, 3, STREAM_BROWNIAN, 1).standard_normal(8))


class TestStats:

    def test_mean_and_se(self):
        mean, se = mean_and_se(np.array([1.0, 2.0, 3.0, 4.0]))
        assert mean == 2.5
        assert se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)
        _, single = mean_and_se(np.array([1.0]))
        assert np.isinf(single)

    def test_covariance_matches_numpy(self):
        samples = np.random.default_rng(0).standard_normal((500, 3))
        cov, se = covariance_and_se(samples)
        assert_allclose(cov, np.cov(samples, rowvar=False), rtol=1e-12)
        assert se.shape == (3, 3)
        # var of a unit variance Gaussian has SE about sqrt(2 / M)
        assert se[0, 0] == pytest.approx(math.sqrt(2.0 / 500), rel=0.25)

    def test_heavy_tails_fall_back_to_bootstrap(self):
        samples = np.random.default_rng(1).standard_normal((400, 1))
        samples[17, 0] = 1e3
        _, se = covariance_and_se(samples, seed=3)
        assert_allclose(se, bootstrap_covariance_se(samples, seed=3))

    def test_z_score(self):
        assert z_score(1.5, 1.0, 0.25) == pytest.approx(2.0)
        assert z_score(1.0, 1.0, 0.0) == 0.0
        assert z_score(2.0, 1.0, 0.0) == math.inf

    def test_normality(self):
        rng = np.random.default_rng(2)
        gaussian = rng.standard_normal((2000, 2))
        assert passes_normality(gaussian)
        assert jarque_bera_pvalues(gaussian).shape == (2,)
        assert not passes_normality(rng.exponential(size=2000))
