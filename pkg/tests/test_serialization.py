import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdpbridge.errors import ParameterError
from rdpbridge.measures import Categorical, Dirac, Empirical, IsotropicGaussian, ProductLaplace
from rdpbridge.mechanisms import (
    AdditiveNoise,
    Deterministic,
    FiniteTable,
    InputNoise,
    Linear,
    Noise,
    OutputNoise,
    Table,
    Threshold1D,
)
from rdpbridge.serialization import (
    InputError,
    as_float,
    classifier_from_json,
    classifier_to_json,
    dumps,
    load_json_arg,
    load_json_text,
    mapping_from_json,
    mapping_to_json,
    measure_from_json,
    measure_to_json,
    round_trip,
)

MEASURES = [
    Categorical([0.25, 0.75, 0.0]),
    IsotropicGaussian([1.0, -2.5], 0.3),
    ProductLaplace([0.1], 2.0),
    Dirac(4),
    Empirical((0, 2, 5), [0.2, 0.3, 0.5]),
]

MAPPINGS = [
    FiniteTable([[0.9, 0.1], [0.1, 0.9]], inputs=[[0], [1]]),
    Deterministic(Threshold1D(0.25)),
    InputNoise(Linear.binary([1.0, -1.0], 0.5), Noise("laplace", 1.5)),
    OutputNoise(Table([0, 1, 1]), [[0.8, 0.2], [0.3, 0.7]]),
    AdditiveNoise(Noise("gaussian", 0.7), 3),
]


@pytest.mark.parametrize("m", MEASURES, ids=lambda m: type(m).__name__)
def test_measure_round_trip(m):
    back = round_trip(m, measure_to_json, measure_from_json)
    assert dumps(measure_to_json(back)) == dumps(measure_to_json(m))


@pytest.mark.parametrize("m", MAPPINGS, ids=lambda m: type(m).__name__)
def test_mapping_round_trip(m):
    back = round_trip(m, mapping_to_json, mapping_from_json)
    assert dumps(mapping_to_json(back)) == dumps(mapping_to_json(m))


def test_binary_linear_shorthand():
    h = classifier_from_json({"variant": "linear_binary", "params": {"w": [1.0, 2.0], "b": -1.0}})
    assert h.predict([1.0, 1.0]) == 1 and h.predict([0.0, 0.0]) == 0
    assert round_trip(h, classifier_to_json, classifier_from_json).predict([1.0, 1.0]) == 1


@given(st.floats(allow_nan=False, allow_infinity=False, min_value=1e-300, max_value=1e300))
def test_floats_survive_text(x):
    m = IsotropicGaussian([x], x)
    assert round_trip(m, measure_to_json, measure_from_json).sigma == x


def test_infinity_is_a_string():
    assert json.loads(dumps({"a": math.inf}))["a"] == "inf"
    assert as_float("inf") == math.inf


def test_output_is_canonical():
    assert dumps({"b": 1, "a": [np.float64(0.1)]}) == dumps({"a": [0.1], "b": 1})


def test_unknown_keys_rejected():
    with pytest.raises(ParameterError):
        measure_from_json({"variant": "gaussian", "params": {"mean": [0.0], "sigma": 1.0, "extra": 1}})
    with pytest.raises(ParameterError):
        mapping_from_json({"variant": "teleport", "params": {}})


def test_missing_key_rejected():
    with pytest.raises(ParameterError):
        measure_from_json({"variant": "laplace", "params": {"loc": [0.0]}})


def test_syntax_error_position():
    with pytest.raises(InputError, match=r"cfg.json:2:"):
        load_json_text('{\n  "a": ,\n}', "cfg.json")


def test_json_arg_forms(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"x": 1}')
    assert load_json_arg('{"x": 1}') == {"x": 1}
    assert load_json_arg(f"@{path}") == {"x": 1}
    assert load_json_arg(str(path)) == {"x": 1}
    assert load_json_arg({"x": 1}) == {"x": 1}
    with pytest.raises(InputError):
        load_json_arg(str(tmp_path / "missing.json"))
