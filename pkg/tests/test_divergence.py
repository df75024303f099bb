import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from rdpbridge.divergence import (
    KL,
    LAMBDA_GRID,
    MAX,
    DivergenceOrder,
    DivergenceResult,
    categorical_divergence,
    categorical_divergence_bounds,
    gaussian_closed_form,
    kl_divergence,
    laplace_closed_form,
    max_divergence,
    renyi_divergence,
    trivial_distance,
)
from rdpbridge.errors import CapabilityError, ParameterError, UnsupportedPairError
from rdpbridge.measures import Categorical, Dirac, Empirical, IsotropicGaussian, ProductLaplace

positive_probs = st.integers(2, 10).flatmap(
    lambda k: st.tuples(
        st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k),
        st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k),
    )
).map(lambda t: (np.array(t[0]) / sum(t[0]), np.array(t[1]) / sum(t[1])))

orders = st.sampled_from([1.01, 1.1, 1.5, 2.0, 3.0, 8.0, 32.0])


class TestOrder:
    def test_parse(self):
        assert DivergenceOrder.parse("kl") == KL
        assert DivergenceOrder.parse("max") == MAX
        assert DivergenceOrder.parse("inf") == MAX
        assert DivergenceOrder.parse("2.5").value == 2.5

    @pytest.mark.parametrize("bad", [0.5, 1.0 - 1e-9, float("nan"), "abc"])
    def test_reject(self, bad):
        with pytest.raises(ParameterError):
            DivergenceOrder.parse(bad)

    def test_result_requires_mc_error(self):
        with pytest.raises(ParameterError):
            DivergenceResult(1.0, "monte_carlo")

    def test_result_clamps_rounding_negatives(self):
        assert DivergenceResult(-1e-12, "quadrature").value == 0.0


class TestCategorical:
    def test_identical_is_zero(self):
        c = Categorical([0.3, 0.7])
        for o in (KL, 2, MAX):
            assert renyi_divergence(c, c, o).value == 0.0

    def test_support_escape(self):
        assert renyi_divergence(Categorical([0.5, 0.5]), Categorical([1.0, 0.0]), MAX).value == math.inf
        assert renyi_divergence(Categorical([0.5, 0.5]), Categorical([1.0, 0.0]), 2).value == math.inf

    def test_two_point_values(self):
        p, q = Categorical([0.9, 0.1]), Categorical([0.1, 0.9])
        assert math.isclose(max_divergence(p, q).value, math.log(9))
        d2 = renyi_divergence(p, q, 2).value
        assert math.isclose(d2, math.log(0.81 / 0.1 + 0.01 / 0.9))

    def test_kl_formula(self):
        p, q = np.array([0.2, 0.3, 0.5]), np.array([0.4, 0.4, 0.2])
        expected = float(np.sum(p * np.log(p / q)))
        assert math.isclose(kl_divergence(Categorical(p), Categorical(q)).value, expected)

    def test_zero_in_p_is_ignored(self):
        v = renyi_divergence(Categorical([1.0, 0.0]), Categorical([0.5, 0.5]), 2).value
        assert math.isclose(v, math.log(2))

    @given(positive_probs, orders, orders)
    def test_monotone_in_order(self, pq, a, b):
        p, q = pq
        assume(p.size == q.size)
        lo, hi = sorted((a, b))
        assert categorical_divergence(p, q, DivergenceOrder(lo)) <= categorical_divergence(
            p, q, DivergenceOrder(hi)) + 1e-9

    @given(positive_probs)
    def test_kl_and_max_bracket(self, pq):
        p, q = pq
        kl = categorical_divergence(p, q, KL)
        mx = categorical_divergence(p, q, MAX)
        for lam in LAMBDA_GRID:
            v = categorical_divergence(p, q, DivergenceOrder(lam))
            assert kl - 1e-9 <= v <= mx + 1e-9

    @given(positive_probs, orders, st.integers(0, 2**32 - 1))
    def test_data_processing(self, pq, lam, seed):
        p, q = pq
        rng = np.random.default_rng(seed)
        k = rng.dirichlet(np.ones(3), size=p.size)  # row i: channel law given input i
        order = DivergenceOrder(lam)
        assert categorical_divergence(p @ k, q @ k, order) <= categorical_divergence(p, q, order) + 1e-9

    @given(positive_probs)
    def test_nonnegative(self, pq):
        p, q = pq
        for lam in (1.5, 4.0):
            assert categorical_divergence(p, q, DivergenceOrder(lam)) >= 0.0

    def test_enumeration_on_continuous_is_capability_error(self):
        with pytest.raises(CapabilityError):
            renyi_divergence(IsotropicGaussian([0.0], 1), IsotropicGaussian([1.0], 1), 2, "enumeration")

    def test_dirac_unsupported(self):
        with pytest.raises(UnsupportedPairError):
            renyi_divergence(Dirac(0), Dirac(1), 2)


class TestBounds:
    @given(positive_probs, orders, st.floats(0.0, 0.05))
    def test_bounds_bracket_value(self, pq, lam, width):
        p, q = pq
        order = DivergenceOrder(lam)
        lo, hi = categorical_divergence_bounds(np.clip(p - width, 0, 1), np.clip(p + width, 0, 1),
                                               np.clip(q - width, 0, 1), np.clip(q + width, 0, 1), order)
        v = categorical_divergence(p, q, order)
        assert lo - 1e-9 <= v <= hi + 1e-9

    def test_degenerate_boxes_are_exact(self):
        p, q = np.array([0.3, 0.7]), np.array([0.6, 0.4])
        for o in (KL, DivergenceOrder(2.0), MAX):
            lo, hi = categorical_divergence_bounds(p, p, q, q, o)
            assert math.isclose(lo, hi, rel_tol=1e-9, abs_tol=1e-12)


class TestGaussian:
    @pytest.mark.parametrize("lam", LAMBDA_GRID)
    def test_closed_form_matches_quadrature(self, lam):
        a, b = IsotropicGaussian([0.0], 0.7), IsotropicGaussian([0.9], 0.7)
        cf = renyi_divergence(a, b, lam, "closed_form").value
        qd = renyi_divergence(a, b, lam, "quadrature").value
        assert abs(cf - qd) <= 1e-8
        assert math.isclose(cf, lam * 0.81 / (2 * 0.49))

    def test_kl_closed_form(self):
        assert math.isclose(gaussian_closed_form(2.0, 1.0, KL), 2.0)

    def test_equal_means_zero(self):
        g = IsotropicGaussian([1.0, 2.0], 1.5)
        assert renyi_divergence(g, g, 3).value == 0.0

    def test_multidimensional_uses_distance(self):
        a, b = IsotropicGaussian([0.0, 0.0], 1.0), IsotropicGaussian([3.0, 4.0], 1.0)
        assert math.isclose(renyi_divergence(a, b, 2).value, 25.0)

    def test_max_unequal_means_infinite(self):
        a, b = IsotropicGaussian([0.0], 1.0), IsotropicGaussian([0.1], 1.0)
        assert max_divergence(a, b).value == math.inf

    def test_unequal_sigma_matches_known_formula(self):
        # D_lambda for 1-D Gaussians with different variances
        m1, s1, m2, s2, lam = 0.3, 1.0, -0.2, 1.3, 2.0
        var = lam * s2**2 + (1 - lam) * s1**2
        expected = (lam * (m1 - m2) ** 2 / (2 * var)
                    - 1 / (2 * (lam - 1)) * math.log(var / (s1 ** (2 * (1 - lam)) * s2 ** (2 * lam))))
        got = renyi_divergence(IsotropicGaussian([m1], s1), IsotropicGaussian([m2], s2), lam).value
        assert abs(got - expected) < 1e-8

    def test_unequal_sigma_escaping_mass_is_infinite(self):
        a, b = IsotropicGaussian([0.0], 2.0), IsotropicGaussian([0.0], 1.0)
        assert renyi_divergence(a, b, 4).value == math.inf

    def test_monte_carlo_is_seeded_and_bounded(self):
        a, b = IsotropicGaussian([0.0], 1.0), IsotropicGaussian([0.5], 1.0)
        r1 = renyi_divergence(a, b, 2, "mc", n=50_000, seed=4)
        r2 = renyi_divergence(a, b, 2, "mc", n=50_000, seed=4)
        assert r1 == r2 or (r1.value == r2.value and r1.error_bound == r2.error_bound)
        assert r1.method == "monte_carlo" and r1.error_bound > 0
        assert abs(r1.value - 0.25) <= 3 * r1.error_bound

    def test_monte_carlo_needs_enough_samples(self):
        with pytest.raises(ParameterError):
            renyi_divergence(IsotropicGaussian([0.0], 1), IsotropicGaussian([0.0], 1), 2, "mc", n=10)

    def test_categorical_mc_close_to_exact(self):
        p, q = Categorical([0.2, 0.5, 0.3]), Categorical([0.4, 0.4, 0.2])
        mc = renyi_divergence(p, q, 2, "mc", n=200_000, seed=1)
        exact = renyi_divergence(p, q, 2).value
        assert abs(mc.value - exact) <= 3 * mc.error_bound


class TestLaplace:
    @pytest.mark.parametrize("lam", [1.01, 1.5, 2.0, 8.0, 64.0])
    def test_closed_form_matches_quadrature(self, lam):
        a, b = ProductLaplace([0.0], 1.0), ProductLaplace([0.7], 1.0)
        assert abs(renyi_divergence(a, b, lam, "closed_form").value
                   - renyi_divergence(a, b, lam, "quadrature").value) < 1e-8

    def test_limits(self):
        t = 0.8
        assert math.isclose(laplace_closed_form(t, 1.0, KL), t + math.exp(-t) - 1)
        assert math.isclose(laplace_closed_form(t, 1.0, MAX), t)

    def test_max_equals_shift_over_scale(self):
        a, b = ProductLaplace([0.0, 0.0], 2.0), ProductLaplace([1.0, -1.0], 2.0)
        assert math.isclose(max_divergence(a, b).value, 1.0)


class TestTrivialDistance:
    def test_equal_and_different(self):
        assert trivial_distance(Categorical([0.5, 0.5]), Categorical([0.5, 0.5])) == 0
        assert trivial_distance(Categorical([0.5, 0.5]), Categorical([0.6, 0.4])) == 1
        assert trivial_distance(Dirac(1), Categorical([0.0, 1.0])) == 0
        assert trivial_distance(IsotropicGaussian([0.0], 1), IsotropicGaussian([0.0], 1)) == 0
        assert trivial_distance(IsotropicGaussian([0.0], 1), IsotropicGaussian([0.0], 2)) == 1

    def test_within_tolerance(self):
        assert trivial_distance(Categorical([0.5, 0.5]), Categorical([0.5 + 1e-13, 0.5 - 1e-13])) == 0

    def test_incomparable(self):
        with pytest.raises(UnsupportedPairError):
            trivial_distance(Categorical([0.5, 0.5]), IsotropicGaussian([0.0], 1))

    def test_empirical_matches_dirac(self):
        assert trivial_distance(Empirical((2, 2), [0.5, 0.5]), Dirac(2)) == 0
