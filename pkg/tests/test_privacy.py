import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdpbridge.divergence import MAX, DivergenceOrder, gaussian_closed_form, laplace_closed_form
from rdpbridge.errors import ParameterError
from rdpbridge.mechanisms import AdditiveNoise, Deterministic, FiniteTable, InputNoise, Linear, Noise, Threshold1D
from rdpbridge.metrics import FiniteSpace, MetricSpec
from rdpbridge.privacy import (
    SearchBudget,
    certify_classical_dp,
    certify_metric_dp,
    certify_rdp,
    finite_divergences,
)

TWO_POINT = FiniteTable([[0.9, 0.1], [0.1, 0.9]])


class TestAnalytic:
    def test_gaussian_l2(self):
        c = certify_rdp(AdditiveNoise(Noise("gaussian", 1.0)), MetricSpec("l2"), 1.0, 2)
        assert c.epsilon == 1.0 and c.method == "analytic" and c.is_upper_bound

    def test_gaussian_linf_uses_corner(self):
        c = certify_rdp(AdditiveNoise(Noise("gaussian", 2.0), 3), MetricSpec("linf", 3), 0.5, 4)
        assert math.isclose(c.epsilon, gaussian_closed_form(0.5 * math.sqrt(3), 2.0, DivergenceOrder(4)))

    def test_laplace_max_l1(self):
        c = certify_rdp(AdditiveNoise(Noise("laplace", 0.5), 2), MetricSpec("l1", 2), 1.0, MAX)
        assert math.isclose(c.epsilon, 2.0)

    def test_laplace_linf_sums_coordinates(self):
        c = certify_rdp(AdditiveNoise(Noise("laplace", 1.0), 2), MetricSpec("linf", 2), 0.3, 2)
        assert math.isclose(c.epsilon, 2 * laplace_closed_form(0.3, 1.0, DivergenceOrder(2)))

    def test_input_noise_certified_through_raw_mechanism(self):
        m = InputNoise(Threshold1D(0.0), Noise("gaussian", 1.0))
        c = certify_rdp(m, MetricSpec("l2"), 1.0, 2)
        assert c.epsilon == 1.0 and "raw" in c.note

    def test_alpha_zero(self):
        c = certify_rdp(AdditiveNoise(Noise("gaussian", 1.0)), MetricSpec("l2"), 0.0, 2)
        assert c.epsilon == 0.0

    def test_witness_attains_value(self):
        c = certify_rdp(AdditiveNoise(Noise("gaussian", 1.5), 2), MetricSpec("l1", 2), 0.7, 3)
        x, xp = c.witness_pair
        assert math.isclose(np.abs(x - xp).sum(), 0.7)

    @given(st.floats(0.1, 3.0), st.floats(0.1, 2.0), st.sampled_from([1.5, 2.0, 8.0]))
    def test_analytic_dominates_search(self, sigma, alpha, lam):
        mech = AdditiveNoise(Noise("gaussian", sigma), 2)
        metric = MetricSpec("l2", 2)
        exact = certify_rdp(mech, metric, alpha, lam)
        found = certify_rdp(mech, metric, alpha, lam, force_search=True, search=SearchBudget(4, 4))
        assert found.epsilon <= exact.epsilon * (1 + 1e-9) + 1e-12
        assert found.method == "search_lower_bound" and not found.is_upper_bound


class TestFinite:
    def test_metric_dp_violated(self):
        v = certify_metric_dp(TWO_POINT, MetricSpec("discrete"), 1.0, 1.0)
        assert v.status == "violated" and v.witness == (0, 1)
        assert math.isclose(v.certificate.epsilon, math.log(9))

    def test_metric_dp_holds(self):
        assert certify_metric_dp(TWO_POINT, MetricSpec("discrete"), 1.0, 2.3).status == "holds"

    def test_alpha_below_every_distance(self):
        c = certify_rdp(TWO_POINT, MetricSpec("discrete"), 0.5, 2)
        assert c.epsilon == 0.0

    def test_diameter_warning(self):
        c = certify_rdp(TWO_POINT, MetricSpec("discrete"), 5.0, 2)
        assert c.warnings

    def test_classical_dp(self):
        mech = FiniteTable([[0.75, 0.25], [0.25, 0.75]], inputs=[[0], [1]])
        assert certify_classical_dp(mech, 1.0).status == "violated"
        assert certify_classical_dp(mech, 1.2).status == "holds"

    def test_classical_needs_rows(self):
        with pytest.raises(ParameterError):
            certify_classical_dp(TWO_POINT, 1.0)

    def test_direction_and_anchors(self):
        # D(row0 || row1) is infinite, D(row1 || row0) finite
        m = FiniteTable([[0.5, 0.5], [1.0, 0.0]])
        space = FiniteSpace.discrete(2)
        fwd = certify_rdp(m, space, 1.0, 2, anchors=[0], direction="forward")
        rev = certify_rdp(m, space, 1.0, 2, anchors=[0], direction="reverse")
        assert fwd.epsilon == math.inf
        assert math.isclose(rev.epsilon, math.log(2))

    def test_divergence_matrix(self):
        d = finite_divergences(TWO_POINT, MAX)
        assert np.allclose(d, [[0, math.log(9)], [math.log(9), 0]])

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(0)
        m = FiniteTable(rng.dirichlet(np.ones(3), size=6), inputs=rng.normal(size=(6, 2)))
        metric = MetricSpec("l2", 2)
        eps = [certify_rdp(m, metric, a, 2).epsilon for a in (0.1, 0.5, 1.0, 2.0, 10.0)]
        assert all(a <= b for a, b in zip(eps, eps[1:]))


class TestSearch:
    def test_deterministic_classifier_is_infinitely_non_private(self):
        m = Deterministic(Threshold1D(0.0))
        c = certify_rdp(m, MetricSpec("l2"), 0.5, 2, search=SearchBudget(32, 8, box=1.0))
        assert c.epsilon == math.inf and c.holds(10.0) is False

    def test_search_inconclusive_when_no_violation(self):
        m = InputNoise(Linear.binary([1.0, 1.0], 0.0), Noise("gaussian", 1.0))
        v = certify_metric_dp(m, MetricSpec("l2", 2), 0.01, 50.0, force_search=True, search=SearchBudget(4, 2))
        assert v.status == "inconclusive"

    def test_search_is_seeded(self):
        m = Deterministic(Linear.binary([1.0, -1.0], 0.2))
        a = certify_rdp(m, MetricSpec("linf", 2), 0.3, 2, search=SearchBudget(8, 4, seed=3))
        b = certify_rdp(m, MetricSpec("linf", 2), 0.3, 2, search=SearchBudget(8, 4, seed=3))
        assert a.to_dict() == b.to_dict()

    def test_bad_direction(self):
        with pytest.raises(ParameterError):
            certify_rdp(TWO_POINT, MetricSpec("discrete"), 1.0, 2, direction="sideways")
