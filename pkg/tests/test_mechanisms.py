import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdpbridge.errors import CapabilityError, DomainError, ParameterError
from rdpbridge.measures import Categorical, Dirac, IsotropicGaussian, ProductLaplace
from rdpbridge.mechanisms import (
    EXACT,
    AdditiveNoise,
    Deterministic,
    FiniteTable,
    InputNoise,
    Linear,
    MonteCarlo,
    Noise,
    OutputNoise,
    SmoothedMeasure,
    Table,
    Threshold1D,
    apply,
    input_space,
    is_constant,
    label_distribution,
)
from rdpbridge.metrics import MetricSpec


class TestClassifiers:
    def test_linear_ties_go_to_lowest_label(self):
        h = Linear([[1.0], [1.0]], [0.0, 0.0])
        assert h.predict([3.0]) == 0

    def test_binary_linear(self):
        h = Linear.binary([1.0, -1.0], 0.5)
        assert h.predict([0.0, 0.0]) == 1
        assert h.predict([0.0, 0.5]) == 0  # on the boundary

    def test_threshold_boundary(self):
        h = Threshold1D(0.0)
        assert h.predict(0.0) == 1 and h.predict(-1e-300) == 0

    def test_table_domain(self):
        h = Table([0, 1, 1])
        assert h.predict(2) == 1
        with pytest.raises(DomainError):
            h.predict(3)

    def test_constant_detection(self):
        assert is_constant(Table([1, 1, 1], num_labels=2))
        assert is_constant(Linear([[1.0, 2.0], [1.0, 2.0]], [0.5, 0.5]))
        assert not is_constant(Threshold1D(0.0))

    def test_linear_shape_errors(self):
        with pytest.raises(ParameterError):
            Linear([[1.0, 2.0]], [0.0])
        with pytest.raises(ParameterError):
            Linear([[1.0], [2.0]], [0.0])

    def test_input_noise_rejects_table(self):
        with pytest.raises(ParameterError):
            InputNoise(Table([0, 1]), Noise("gaussian", 1.0))


class TestApply:
    def test_deterministic_gives_dirac(self):
        m = apply(Deterministic(Threshold1D(0.0)), 1.0)
        assert isinstance(m, Dirac) and m.point == 1

    def test_finite_table_row(self):
        m = apply(FiniteTable([[0.9, 0.1], [0.1, 0.9]]), 1)
        assert isinstance(m, Categorical) and np.allclose(m.probs, [0.1, 0.9])

    def test_output_noise_row(self):
        m = apply(OutputNoise(Threshold1D(0.0), [[0.8, 0.2], [0.3, 0.7]]), -1.0)
        assert np.allclose(m.probs, [0.8, 0.2])

    def test_one_hot_channel_is_dirac(self):
        m = apply(OutputNoise(Threshold1D(0.0), [[0.0, 1.0], [1.0, 0.0]]), -1.0)
        assert isinstance(m, Dirac) and m.point == 1

    def test_input_noise_is_smoothed(self):
        m = apply(InputNoise(Threshold1D(0.0), Noise("gaussian", 1.0)), 0.5)
        assert isinstance(m, SmoothedMeasure)
        assert isinstance(m.raw, IsotropicGaussian)

    def test_additive_noise(self):
        assert isinstance(apply(AdditiveNoise(Noise("laplace", 1.0), 2), [0.0, 1.0]), ProductLaplace)

    def test_wrong_dimension(self):
        with pytest.raises(DomainError):
            apply(AdditiveNoise(Noise("gaussian", 1.0), 2), [0.0])

    def test_finite_out_of_range(self):
        with pytest.raises(DomainError):
            apply(FiniteTable([[0.5, 0.5]]), 1)


class TestLabelDistribution:
    def test_smoothed_threshold_gaussian(self):
        m = InputNoise(Threshold1D(0.0), Noise("gaussian", 1.0))
        d = label_distribution(m, 1.0)
        assert abs(d.probs[1] - 0.8413447460685429) < 1e-12
        assert np.allclose(label_distribution(m, 0.0).probs, [0.5, 0.5])

    def test_smoothed_threshold_laplace(self):
        m = InputNoise(Threshold1D(0.0), Noise("laplace", 2.0))
        d = label_distribution(m, 1.0)
        assert math.isclose(d.probs[1], 1 - 0.5 * math.exp(-0.5))
        d = label_distribution(m, -1.0)
        assert math.isclose(d.probs[1], 0.5 * math.exp(-0.5))

    def test_exact_unavailable_for_linear_smoothing(self):
        m = InputNoise(Linear.binary([1.0, 1.0], 0.0), Noise("gaussian", 1.0))
        with pytest.raises(CapabilityError):
            label_distribution(m, [0.0, 0.0], EXACT)

    def test_raw_mechanism_has_no_labels(self):
        with pytest.raises(CapabilityError):
            label_distribution(AdditiveNoise(Noise("gaussian", 1.0)), [0.0])

    def test_monte_carlo_matches_exact(self):
        m = InputNoise(Threshold1D(0.2), Noise("gaussian", 0.5))
        exact = label_distribution(m, 0.0).probs
        mc = label_distribution(m, 0.0, MonteCarlo(200_000, seed=3))
        assert np.all(mc.lower <= exact) and np.all(exact <= mc.upper)
        assert mc.n == 200_000 and mc.method == "monte_carlo"

    @given(st.integers(1, 4), st.integers(0, 1000))
    def test_threads_do_not_change_estimates(self, threads, seed):
        m = InputNoise(Linear.binary([1.0, -0.5], 0.1), Noise("laplace", 1.0))
        budget = MonteCarlo(3000, seed=seed, chunk=700)
        a = label_distribution(m, [0.3, 0.1], budget, threads=1)
        b = label_distribution(m, [0.3, 0.1], budget, threads=threads)
        assert np.array_equal(a.probs, b.probs) and np.array_equal(a.upper, b.upper)

    def test_channel_mc_bounds(self):
        m = OutputNoise(Threshold1D(0.0), [[0.7, 0.3], [0.4, 0.6]])
        d = label_distribution(m, 1.0, MonteCarlo(50_000, seed=1))
        assert d.lower[1] <= 0.6 <= d.upper[1]


class TestInputSpace:
    def test_from_inputs(self):
        m = FiniteTable([[0.5, 0.5]] * 3, inputs=[[0, 0], [0, 1], [1, 1]])
        s = input_space(m, MetricSpec("hamming", 2))
        assert s.distance(0, 2) == 2.0

    def test_discrete_default(self):
        s = input_space(FiniteTable([[0.5, 0.5]] * 3), MetricSpec("discrete"))
        assert s.diameter == 1.0

    def test_coordinate_metric_needs_inputs(self):
        with pytest.raises(ParameterError):
            input_space(FiniteTable([[0.5, 0.5]] * 3), MetricSpec("l2"))

    def test_continuous_has_no_table(self):
        with pytest.raises(CapabilityError):
            input_space(Deterministic(Threshold1D(0.0)), MetricSpec("l2"))
