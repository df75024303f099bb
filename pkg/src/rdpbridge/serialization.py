"""JSON encoding of measures, classifiers, mappings and reports.

Every object is ``{"variant": name, "params": {...}}``. Floats are written
with ``repr`` (shortest round-trip form, at most 17 significant digits) and
non-finite values as the strings ``"inf"`` / ``"-inf"``, so output is both
valid JSON and bit-stable. Decoding is strict: unknown variants or keys
raise :class:`ParameterError`.
"""

from __future__ import annotations

import json
import math
from typing import Any, Callable, Dict

import numpy as np

from rdpbridge.errors import ParameterError
from rdpbridge.measures import Categorical, Dirac, Empirical, IsotropicGaussian, LabelDistribution, ProductLaplace
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


def plain(obj: Any) -> Any:
    """Convert numpy values and non-finite floats into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            raise ParameterError("NaN cannot be serialized")
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def as_float(v) -> float:
    if isinstance(v, str):
        text = v.strip().lower()
        if text in ("inf", "+inf", "infinity"):
            return math.inf
        if text in ("-inf", "-infinity"):
            return -math.inf
    if isinstance(v, bool):
        raise ParameterError(f"expected a number, got {v!r}")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ParameterError(f"expected a number, got {v!r}") from None


def _fields(obj: dict, required, optional=()) -> dict:
    if not isinstance(obj, dict):
        raise ParameterError(f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ParameterError(f"unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ParameterError(f"missing keys {missing}")
    return obj


def _split(obj: dict):
    _fields(obj, ("variant", "params"))
    return obj["variant"], obj["params"]


# --------------------------------------------------------------------------
# measures

def measure_to_json(m) -> dict:
    if isinstance(m, LabelDistribution):
        m = m.as_measure()
    if isinstance(m, Categorical):
        return {"variant": "categorical", "params": {"probs": m.probs}}
    if isinstance(m, IsotropicGaussian):
        return {"variant": "gaussian", "params": {"mean": m.mean, "sigma": m.sigma}}
    if isinstance(m, ProductLaplace):
        return {"variant": "laplace", "params": {"loc": m.loc, "scale": m.scale}}
    if isinstance(m, Dirac):
        return {"variant": "dirac", "params": {"point": m.point}}
    if isinstance(m, Empirical):
        return {"variant": "empirical", "params": {"samples": list(m.samples), "weights": m.weights}}
    raise ParameterError(f"cannot serialize {type(m).__name__}")


def measure_from_json(obj: dict):
    variant, p = _split(obj)
    if variant == "categorical":
        _fields(p, ("probs",))
        return Categorical(p["probs"])
    if variant == "gaussian":
        _fields(p, ("mean", "sigma"))
        return IsotropicGaussian(p["mean"], as_float(p["sigma"]))
    if variant == "laplace":
        _fields(p, ("loc", "scale"))
        return ProductLaplace(p["loc"], as_float(p["scale"]))
    if variant == "dirac":
        _fields(p, ("point",))
        return Dirac(p["point"])
    if variant == "empirical":
        _fields(p, ("samples", "weights"))
        return Empirical(tuple(p["samples"]), p["weights"])
    raise ParameterError(f"unknown measure variant {variant!r}")


# --------------------------------------------------------------------------
# classifiers and mappings

def classifier_to_json(h) -> dict:
    if isinstance(h, Linear):
        return {"variant": "linear", "params": {"weights": h.weights, "bias": h.bias}}
    if isinstance(h, Threshold1D):
        return {"variant": "threshold1d", "params": {"cut": h.cut}}
    if isinstance(h, Table):
        params = {"labels": h.labels, "num_labels": h.num_labels}
        if h.inputs is not None:
            params["inputs"] = h.inputs
        return {"variant": "table", "params": params}
    raise ParameterError(f"cannot serialize {type(h).__name__}")


def classifier_from_json(obj: dict):
    variant, p = _split(obj)
    if variant == "linear":
        _fields(p, ("weights", "bias"))
        return Linear(p["weights"], p["bias"])
    if variant == "linear_binary":
        _fields(p, ("w", "b"))
        return Linear.binary(p["w"], as_float(p["b"]))
    if variant == "threshold1d":
        _fields(p, ("cut",))
        return Threshold1D(as_float(p["cut"]))
    if variant == "table":
        _fields(p, ("labels",), ("num_labels", "inputs"))
        return Table(p["labels"], p.get("num_labels", 0), p.get("inputs"))
    raise ParameterError(f"unknown classifier variant {variant!r}")


def _noise_from(p) -> Noise:
    _fields(p, ("kind", "scale"))
    return Noise(p["kind"], as_float(p["scale"]))


def mapping_to_json(m) -> dict:
    noise = lambda n: {"kind": n.kind, "scale": n.scale}
    if isinstance(m, FiniteTable):
        params = {"probs": m.probs}
        if m.inputs is not None:
            params["inputs"] = m.inputs
        return {"variant": "finite_table", "params": params}
    if isinstance(m, Deterministic):
        return {"variant": "deterministic", "params": {"base": classifier_to_json(m.base)}}
    if isinstance(m, InputNoise):
        return {"variant": "input_noise", "params": {"base": classifier_to_json(m.base), "noise": noise(m.noise)}}
    if isinstance(m, OutputNoise):
        return {"variant": "output_noise",
                "params": {"base": classifier_to_json(m.base), "flip_matrix": m.flip_matrix}}
    if isinstance(m, AdditiveNoise):
        return {"variant": "additive_noise", "params": {"noise": noise(m.noise), "dimension": m.dimension}}
    raise ParameterError(f"cannot serialize {type(m).__name__}")


def mapping_from_json(obj: dict):
    variant, p = _split(obj)
    if variant == "finite_table":
        _fields(p, ("probs",), ("inputs",))
        return FiniteTable(p["probs"], p.get("inputs"))
    if variant == "deterministic":
        _fields(p, ("base",))
        return Deterministic(classifier_from_json(p["base"]))
    if variant == "input_noise":
        _fields(p, ("base", "noise"))
        return InputNoise(classifier_from_json(p["base"]), _noise_from(p["noise"]))
    if variant == "output_noise":
        _fields(p, ("base", "flip_matrix"))
        return OutputNoise(classifier_from_json(p["base"]), p["flip_matrix"])
    if variant == "additive_noise":
        _fields(p, ("noise",), ("dimension",))
        return AdditiveNoise(_noise_from(p["noise"]), int(p.get("dimension", 1)))
    raise ParameterError(f"unknown mapping variant {variant!r}")


def round_trip(obj, encode: Callable[[Any], dict], decode: Callable[[dict], Any]):
    """Decode the canonical JSON text of ``encode(obj)``; used in tests."""
    return decode(json.loads(dumps(encode(obj))))


def load_json_text(text: str, source: str = "<input>") -> Any:
    """Parse JSON, reporting syntax errors with line and column."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


class InputError(ParameterError):
    """Malformed input file; the message carries ``file:line:column``."""


def load_json_file(path: str) -> Any:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    return load_json_text(text, path)


def load_json_arg(value: str) -> Any:
    """A CLI argument holding either inline JSON or ``@path`` / a file path.

    Values that are already decoded (from a config file) pass through.
    """
    if not isinstance(value, str):
        return value
    stripped = value.lstrip()
    if stripped.startswith("{") or stripped.startswith("["):
        return load_json_text(value, "<argument>")
    return load_json_file(value[1:] if value.startswith("@") else value)


Decoder = Callable[[Dict[str, Any]], Any]
