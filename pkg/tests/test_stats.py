import numpy as np
import pytest
import scipy.stats
import scipy.special
from hypothesis import given, settings, strategies as st

from multisens.errors import ConfigurationError, DegenerateModelError
from multisens.stats import (SampleSeries, TestResult, betainc, compare_series, ecdf_and_pdf, f_cdf,
                             kolmogorov_sf, ks_two_sample, levene)

rng = np.random.default_rng(5)
samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=10, max_size=60)


class TestSpecialFunctions:
    @pytest.mark.parametrize("a, b", [(0.5, 0.5), (0.5, 50.0), (2.0, 3.0), (10.0, 0.7), (300.0, 0.5)])
    def test_betainc(self, a, b):
        for x in (1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999):
            assert betainc(a, b, x) == pytest.approx(scipy.special.betainc(a, b, x), rel=1e-10, abs=1e-300)

    def test_f_table(self):
        assert f_cdf(3.94, 1, 100) == pytest.approx(0.95, abs=1e-3)
        assert f_cdf(3.94, 1, 100) == pytest.approx(scipy.stats.f.cdf(3.94, 1, 100), rel=1e-10)

    @pytest.mark.parametrize("lam", [0.2, 0.5, 1.0, 1.17, 1.19, 2.0, 4.0])
    def test_kolmogorov(self, lam):
        assert kolmogorov_sf(lam) == pytest.approx(scipy.special.kolmogorov(lam), abs=1e-12)


class TestKS:
    def test_identical(self):
        a = rng.random(50)
        r = ks_two_sample(a, a)
        assert r.statistic == 0.0 and r.p_value == 1.0

    def test_disjoint(self):
        a = np.arange(10) / 10
        assert ks_two_sample(a, a + 10).statistic == 1.0

    def test_matches_reference(self):
        a, b = rng.normal(size=800), rng.normal(0.1, 1.0, size=600)
        ref = scipy.stats.ks_2samp(a, b, method="asymp")
        r = ks_two_sample(a, b)
        assert r.statistic == pytest.approx(ref.statistic, abs=1e-15)
        assert r.p_value == pytest.approx(scipy.special.kolmogorov(np.sqrt(800 * 600 / 1400) * ref.statistic),
                                          rel=1e-9)

    def test_too_small(self):
        with pytest.raises(ConfigurationError):
            ks_two_sample(np.arange(5), np.arange(20))

    @settings(max_examples=60, deadline=None)
    @given(samples, samples)
    def test_monotone_transform_invariance(self, a, b):
        a, b = np.array(a) / 1e3, np.array(b) / 1e3
        r1 = ks_two_sample(a, b)
        r2 = ks_two_sample(np.arctan(a), np.arctan(b))
        assert r1.statistic == pytest.approx(r2.statistic, abs=1e-12)
        assert 0 <= r1.p_value <= 1

    def test_p_decreasing_in_d(self):
        p = [kolmogorov_sf(np.sqrt(50) * d) for d in np.linspace(0.01, 0.9, 80)]
        assert np.all(np.diff(p) <= 0)


class TestLevene:
    def test_identical(self):
        a = rng.normal(size=40)
        r = levene(a, a)
        assert r.statistic == pytest.approx(0.0, abs=1e-12)
        assert r.p_value == pytest.approx(1.0, abs=1e-12)

    def test_scaled_grids_rejected(self):
        a = np.concatenate([np.arange(0.5, 50, 1.0), -np.arange(0.5, 50, 1.0)]) / 50
        assert levene(a, 3 * a).p_value < 0.01

    def test_matches_reference(self):
        a, b = rng.normal(size=300), rng.normal(0, 1.2, size=250)
        ref = scipy.stats.levene(a, b, center="mean")
        r = levene(a, b)
        assert r.statistic == pytest.approx(ref.statistic, rel=1e-10)
        assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9)

    def test_median_variant(self):
        a, b = rng.normal(size=100), rng.normal(0, 2, size=100)
        ref = scipy.stats.levene(a, b, center="median")
        assert levene(a, b, center="median").statistic == pytest.approx(ref.statistic, rel=1e-10)

    def test_degenerate(self):
        with pytest.raises(DegenerateModelError):
            levene(np.ones(20), np.full(20, 2.0))

    @settings(max_examples=60, deadline=None)
    @given(samples, samples, st.floats(-100, 100), st.floats(0.01, 100))
    def test_shift_and_scale_invariance(self, a, b, shift, scale):
        a, b = np.array(a), np.array(b)
        if np.ptp(a) < 1e-3 or np.ptp(b) < 1e-3:
            return
        w = levene(a, b).statistic
        assert levene(a + shift, b + shift).statistic == pytest.approx(w, rel=1e-6, abs=1e-8)
        assert levene(scale * a, scale * b).statistic == pytest.approx(w, rel=1e-6, abs=1e-8)

    def test_result_round_trip(self):
        r = levene(rng.random(20), rng.random(20))
        assert TestResult.from_dict(r.to_dict()) == r


class TestSeries:
    def test_identity(self):
        s = SampleSeries(np.arange(3.0), rng.normal(size=(40, 3)))
        c = compare_series(s, s)
        assert c.max_rel_err_std == 0.0 and c.max_rel_err_mean == 0.0

    def test_grid_mismatch(self):
        a = SampleSeries(np.arange(3.0), rng.normal(size=(40, 3)))
        b = SampleSeries(np.arange(3.0) + 1, rng.normal(size=(40, 3)))
        with pytest.raises(ConfigurationError):
            compare_series(a, b)

    def test_guarded_denominator(self):
        full = SampleSeries(np.array([0.0, 1.0]), np.column_stack([np.zeros(30), rng.normal(size=30)]))
        red = SampleSeries(np.array([0.0, 1.0]), np.column_stack([np.zeros(30), rng.normal(size=30)]))
        rows = compare_series(full, red).rows()
        assert rows[0]["rel_err_std"] is None

    def test_unbiased_std(self):
        x = rng.normal(size=(50, 1))
        rows = compare_series(SampleSeries(np.array([1.0]), x), SampleSeries(np.array([1.0]), 2 * x)).rows()
        assert rows[0]["std_full"] == pytest.approx(np.std(x, ddof=1), rel=1e-14)
        assert rows[0]["rel_err_std"] == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("n, times", [(29, [0.0]), (40, [1.0, 1.0])])
    def test_invariants(self, n, times):
        with pytest.raises(ConfigurationError):
            SampleSeries(np.array(times), np.zeros((n, len(times))))


class TestEcdfPdf:
    def test_grid_density(self):
        e = ecdf_and_pdf(np.arange(0.05, 1.0, 0.1), 10, value_range=(0.0, 1.0))
        np.testing.assert_allclose(e.density, 1.0, atol=1e-12)

    def test_unit_step(self):
        e = ecdf_and_pdf(np.full(20, 3.0), 10)
        assert e.degenerate
        np.testing.assert_array_equal(e.ecdf_at([2.9, 3.0, 3.1]), [0.0, 1.0, 1.0])

    def test_ecdf_at_max(self):
        a = rng.random(100)
        assert ecdf_and_pdf(a, 5).ecdf_at([a.max()])[0] == 1.0

    @settings(max_examples=60, deadline=None)
    @given(samples, st.integers(2, 40))
    def test_integrates_to_one(self, a, bins):
        e = ecdf_and_pdf(np.array(a), bins)
        assert abs(np.sum(e.density * np.diff(e.edges)) - 1) <= 1e-9

    def test_bins(self):
        with pytest.raises(ConfigurationError):
            ecdf_and_pdf(rng.random(10), 1)
