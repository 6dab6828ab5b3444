import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from helpers import sf_of
from multisens.bounds import (Additive, AffineLinear, ComponentMoments, CouplingBoundReport, CrossMoment,
                              LipschitzCoercive, SharedSum, bound_additive, bound_affine, bound_lipschitz,
                              bound_mixed_affine, bound_multiplicative, bound_shared_sum, form_from_dict,
                              form_from_name, form_to_dict, mixed_affine_value, shared_sum_value)
from multisens.errors import ConfigurationError, DegenerateModelError, InconsistentMomentsError
from multisens.zoo import arctan_coupling

U01 = ComponentMoments(0.5, 1 / 3)
moment = st.tuples(st.floats(-10, 10), st.floats(1e-3, 10)).map(lambda mv: ComponentMoments(mv[0], mv[0] ** 2 + mv[1]))


class TestComponentMoments:
    def test_variance_derived(self):
        assert U01.variance == pytest.approx(1 / 12, abs=1e-15)

    def test_cauchy_schwarz(self):
        with pytest.raises(InconsistentMomentsError):
            ComponentMoments(1.0, 0.5)

    def test_constant(self):
        c = ComponentMoments.constant(3.0)
        assert c.variance == 0.0 and c.second_moment == 9.0

    def test_cross_moment_of_independent(self):
        rng = np.random.default_rng(0)
        c = CrossMoment.from_values(rng.random(10 ** 5), rng.random(10 ** 5))
        assert abs(c.cov) < 3 * c.se + 1e-12
        assert c.mean_product == pytest.approx(0.25, abs=0.005)


class TestMultiplicative:
    def test_uniform_product(self):
        r = bound_multiplicative(U01, U01, sf_of(x1=1.0))
        assert r.factor == pytest.approx(4 / 7, abs=1e-12)
        assert r["x1"].sg == pytest.approx(4 / 7, abs=1e-12)
        assert r.exact

    def test_centered_f(self):
        r = bound_multiplicative(ComponentMoments(0.0, 1.0), U01, sf_of(x1=0.3))
        assert r.factor == 1.0
        assert r["x1"].sg == 0.3

    def test_constant_h(self):
        r = bound_multiplicative(U01, ComponentMoments.constant(2.0), sf_of(x1=0.4, x2=0.6))
        assert r.factor == pytest.approx(1.0, abs=1e-12)

    def test_constant_f_degenerate(self):
        with pytest.raises(DegenerateModelError):
            bound_multiplicative(ComponentMoments.constant(1.0), U01, sf_of(x1=1.0))

    def test_zero_h(self):
        with pytest.raises(DegenerateModelError):
            bound_multiplicative(U01, ComponentMoments.constant(0.0), sf_of(x1=1.0))

    @settings(max_examples=200, deadline=None)
    @given(moment, moment)
    def test_factor_range_and_lower_bound(self, f, h):
        r = bound_multiplicative(f, h, sf_of(x1=0.7))
        lower = 1 - f.mean ** 2 / f.second_moment
        assert lower - 1e-12 <= r.factor <= 1.0
        assert r.factor > 0
        assert r["x1"].sg_lower <= r["x1"].sg + 1e-12 <= r["x1"].sg_upper + 2e-12


class TestAdditive:
    def test_equal_variances(self):
        assert bound_additive(U01, U01, sf_of(x1=1.0)).factor == pytest.approx(0.5, abs=1e-15)

    def test_deterministic_h(self):
        r = bound_additive(U01, ComponentMoments.constant(5.0), sf_of(x1=0.25))
        assert r.factor == 1.0 and r["x1"].sg == 0.25

    def test_uniform_sum(self):
        assert bound_additive(U01, U01, sf_of(x1=1.0))["x1"].sg == pytest.approx(0.5, abs=1e-15)

    def test_degenerate(self):
        with pytest.raises(DegenerateModelError):
            bound_additive(ComponentMoments.constant(0.0), U01, sf_of(x1=1.0))

    @settings(max_examples=200, deadline=None)
    @given(moment, st.floats(0, 1e3))
    def test_factor_range(self, f, vh):
        r = bound_additive(f, ComponentMoments(0.0, vh), sf_of(x1=1.0))
        assert 0 < r.factor <= 1


class TestAffine:
    def test_reduces_to_multiplicative(self):
        f = ComponentMoments(2.0, 4.5)
        h = ComponentMoments(0.3, 0.2)
        zero = ComponentMoments.constant(0.0)
        a = bound_affine(f, h, zero, CrossMoment(0.0, 0.0), sf_of(x1=0.5))
        m = bound_multiplicative(f, h, sf_of(x1=0.5))
        assert abs(a.factor - m.factor) <= 1e-12

    def test_independent_h2(self):
        r = bound_affine(U01, U01, U01, CrossMoment.independent(U01, U01), sf_of(x1=1.0))
        assert r.factor == pytest.approx((1 / 12) / (1 / 3 - 3 / 16 + (1 / 12) / (1 / 3)), abs=1e-12)
        assert r.factor == pytest.approx(0.2105263, abs=1e-7)
        assert r.factor < bound_multiplicative(U01, U01, sf_of(x1=1.0)).factor
        assert r["x1"].sg_upper == 1.0

    def test_negative_covariance_gate(self):
        r = bound_affine(U01, U01, U01, CrossMoment(0.2, -0.02, 0.001), sf_of(x1=0.8))
        ok = {c.name: c.satisfied for c in r.conditions}
        assert not ok["mean_h1_times_cov_f_h2_nonnegative"]
        assert ok["mean_h1_times_cov_f_h2_nonpositive"]
        assert r["x1"].sg_upper is None
        assert not r.certified
        assert r["x1"].sg_lower is not None
        assert "sg_upper_alt" in r["x1"].extra

    def test_noise_level_covariance_not_certified(self):
        r = bound_affine(U01, U01, U01, CrossMoment(0.25, 1e-4, 1e-3), sf_of(x1=0.8))
        assert r["x1"].sg_upper is None

    def test_inputs_shared_with_h2_get_no_bound(self):
        r = bound_affine(U01, U01, U01, CrossMoment.independent(U01, U01), sf_of(x1=0.5, x2=0.5),
                         h2_inputs=["x2"])
        assert r["x2"].sg_upper is None and r["x1"].sg_upper == 0.5


class TestSharedSum:
    def test_sharpness_case(self):
        r = bound_shared_sum(sf_of(x1=0.3), sf_of(x1=0.3), 2.0, 2.0, 1.0)
        assert r["x1"].sg_upper == pytest.approx(0.6, abs=1e-12)
        assert r["x1"].extra["loose"] == pytest.approx(0.6)

    def test_independent_h(self):
        r = bound_shared_sum(sf_of(x1=0.8), sf_of(x1=0.0), 1.0, 3.0, 0.0)
        assert r["x1"].sg_upper == pytest.approx(0.2, abs=1e-12)

    def test_g_equals_two_x(self):
        var = 1 / 12
        r = bound_shared_sum(sf_of(x1=1.0), sf_of(x1=1.0), var, var, var)
        assert r["x1"].sg_upper == pytest.approx(2.0) and r["x1"].sg_upper >= 1.0

    def test_negative_covariance(self):
        r = bound_shared_sum(sf_of(x1=0.5), sf_of(x1=0.5), 1.0, 1.0, -0.1)
        assert r["x1"].sg_upper is None and not r.conditions[0].satisfied

    def test_iterated(self):
        r = bound_shared_sum(sf_of(x1=0.2), sf_of(x1=0.3), 1.0, 1.0, 0.1, k=2,
                             sh_parts=[sf_of(x1=0.1), sf_of(x1=0.4)])
        assert r.factor == 4.0
        assert r["x1"].extra["iterated"] == pytest.approx(1.6)

    def test_needs_variances(self):
        with pytest.raises(ConfigurationError):
            bound_shared_sum(sf_of(x1=0.2), sf_of(x1=0.3), 0.0, 1.0, 0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(1e-3, 10), st.floats(1e-3, 10))
    def test_bounded_by_loose(self, a, b, vf, vh):
        assert shared_sum_value(a, b, vf, vh) <= 2 * max(a, b) + 1e-12


class TestMixedAffine:
    def test_reduces_to_shared_sum(self):
        f = ComponentMoments(0.5, 1 / 3)
        h2 = ComponentMoments(1.0, 1.5)
        one = ComponentMoments.constant(1.0)
        m = bound_mixed_affine(sf_of(x1=0.4), sf_of(x1=0.7), f, one, h2, 0.1)
        s = bound_shared_sum(sf_of(x1=0.4), sf_of(x1=0.7), f.variance, h2.variance, 0.1)
        assert abs(m["x1"].sg_upper - s["x1"].sg_upper) <= 1e-12

    def test_constant_h2(self):
        h1 = ComponentMoments(0.5, 1 / 3)
        v = mixed_affine_value(0.6, 0.0, U01, h1, ComponentMoments.constant(2.0))
        expected = 0.6 * (1 / 3) * (1 / 12) / ((1 / 3) * (1 / 12) + 0.25 * (1 / 12))
        assert v == pytest.approx(expected, abs=1e-12)

    def test_gate(self):
        r = bound_mixed_affine(sf_of(x1=0.4), sf_of(x1=0.7), U01, U01, U01, -0.05)
        assert r["x1"].sg_upper is None


class TestLipschitz:
    def test_tightest_case(self):
        r = bound_lipschitz(LipschitzCoercive(1.5, 1.5), 2.0, 0.0, sf_of(x1=0.3))
        assert r["x1"].sg_upper == pytest.approx(0.6, abs=1e-12)

    def test_arctan_multiplier(self):
        _, L, c = arctan_coupling(1.0, 1.0)
        assert (L, c) == (2.0, 1.0)
        r = bound_lipschitz(LipschitzCoercive(L, c), 1.0, 3.0, sf_of(x1=1.0))
        assert r.factor == pytest.approx(8 * 1 / 4)

    def test_arctan_constants_by_grid(self):
        G, L, c = arctan_coupling(1.0, 1.0)
        u = np.concatenate([np.geomspace(1e-7, 10, 400), -np.geomspace(1e-7, 10, 400)])
        v = np.linspace(-10, 10, 801)
        U, V = np.meshgrid(u, v)
        step = 1e-9
        slope = np.abs((G(U + step, V) - G(U - step, V)) / (2 * step))
        assert slope.max() <= L + 1e-5
        assert slope.max() >= L - 1e-3
        assert np.all(G(U, V) >= c * (np.abs(U) + np.abs(V)) - 1e-12)

    def test_corollary(self):
        form = LipschitzCoercive(2.0, 1.0, g0=0.5)
        r = bound_lipschitz(form, 1.0, 1.0, sf_of(x1=0.5))
        assert r.factor == pytest.approx(2 * 4 * 1.0 / (2.0 - 0.25))

    def test_corollary_gate_boundary(self):
        r = bound_lipschitz(LipschitzCoercive(2.0, 1.0, g0=math.sqrt(2.0)), 1.0, 1.0, sf_of(x1=0.5))
        assert not r.conditions[0].satisfied
        assert r["x1"].sg_upper is None

    def test_vector_h(self):
        form = LipschitzCoercive(1.0, 1.0, h_is_vector=True)
        r = bound_lipschitz(form, 1.0, [0.5, 0.5], sf_of(x1=1.0))
        assert r.factor == pytest.approx(1.0)
        with pytest.raises(ConfigurationError):
            bound_lipschitz(LipschitzCoercive(1.0, 1.0), 1.0, [0.5, 0.5], sf_of(x1=1.0))

    def test_inputs_read_by_h_get_no_bound(self):
        r = bound_lipschitz(LipschitzCoercive(2.0, 1.0), 1.0, 1.0, sf_of(x1=0.5, x2=0.2), h_inputs=["x2"])
        assert r["x1"].sg_upper == pytest.approx(4.0 * 0.5)
        assert r["x2"].sg_upper is None
        assert any(c.name == "h_independent_of_x2" and not c.satisfied for c in r.conditions)

    @pytest.mark.parametrize("L, c", [(1.0, 2.0), (1.0, 0.0), (1.0, -1.0), (math.inf, 1.0)])
    def test_invalid_constants(self, L, c):
        with pytest.raises(ConfigurationError):
            LipschitzCoercive(L, c)


class TestSerialization:
    @pytest.mark.parametrize("form", [Additive(), AffineLinear(), SharedSum(3), LipschitzCoercive(2.0, 1.0, 0.1)])
    def test_form_round_trip(self, form):
        assert form_from_dict(form_to_dict(form)) == form

    def test_form_from_name(self):
        assert form_from_name("lipschitz", L=2, c=1) == LipschitzCoercive(2.0, 1.0)
        with pytest.raises(ConfigurationError):
            form_from_name("quadratic")

    def test_report_round_trip(self):
        r = bound_affine(U01, U01, U01, CrossMoment(0.2, -0.02, 0.001), sf_of(x1=0.8, x2=0.1))
        d = r.to_dict()
        assert CouplingBoundReport.from_dict(d).to_dict() == d
        assert {"form", "factor", "conditions", "per_input"} <= set(d)
