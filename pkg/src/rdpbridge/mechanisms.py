"""Base classifiers and probabilistic mappings built on top of them.

A probabilistic mapping sends an input ``x`` to a probability measure.
Classification mappings output measures on the label set ``[N]``; the
:class:`AdditiveNoise` mechanism outputs ``x`` plus noise on ``R^k`` and is
what the analytic privacy and robustness certificates reason about.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Union

import numpy as np

from rdpbridge.errors import CapabilityError, DomainError, ParameterError
from rdpbridge.measures import (
    SUM_TOL,
    Categorical,
    Dirac,
    IsotropicGaussian,
    LabelDistribution,
    ProductLaplace,
    as_point,
)
from rdpbridge.metrics import FiniteSpace, MetricSpec
from rdpbridge.rng import SeedLike, child, make_rng
from rdpbridge.stats import clopper_pearson

# --------------------------------------------------------------------------
# base classifiers


@dataclasses.dataclass(frozen=True, eq=False)
class Linear:
    """``argmax_j (W x + b)_j``; ties go to the lowest label index."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, ndmin=2)
        b = np.array(self.bias, dtype=float, ndmin=1)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ParameterError("weights must be N x k and bias of length N")
        if w.shape[0] < 2:
            raise ParameterError("a linear classifier needs at least two labels")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ParameterError("weights and bias must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @classmethod
    def binary(cls, w, b: float) -> "Linear":
        """Label 1 iff ``w.x + b > 0``."""
        w = np.asarray(w, dtype=float).ravel()
        return cls(np.stack([np.zeros_like(w), w]), np.array([0.0, float(b)]))

    @property
    def num_labels(self) -> int:
        return self.weights.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    def scores(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(-1, self.input_dim)
        return xs @ self.weights.T + self.bias

    def predict_batch(self, xs) -> np.ndarray:
        return np.argmax(self.scores(xs), axis=1)

    def predict(self, x) -> int:
        return int(self.predict_batch(as_point(x, self.input_dim))[0])


@dataclasses.dataclass(frozen=True)
class Threshold1D:
    """Label 1 iff ``x >= cut``."""

    cut: float

    num_labels = 2
    input_dim = 1

    def __post_init__(self):
        if not math.isfinite(self.cut):
            raise ParameterError("cut must be finite")
        object.__setattr__(self, "cut", float(self.cut))

    def predict_batch(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float).reshape(-1)
        return (xs >= self.cut).astype(int)

    def predict(self, x) -> int:
        return int(self.predict_batch(as_point(x, 1))[0])


@dataclasses.dataclass(frozen=True, eq=False)
class Table:
    """Classifier on the finite input space ``{0, ..., n-1}``.

    ``inputs`` optionally gives coordinates for each index (e.g. database
    rows) so that a coordinate metric can induce distances.
    """

    labels: np.ndarray
    num_labels: int = 0
    inputs: Optional[np.ndarray] = None

    def __post_init__(self):
        labels = np.array(self.labels, dtype=int).ravel()
        if labels.size == 0 or np.any(labels < 0):
            raise ParameterError("labels must be a non-empty vector of non-negative ints")
        n = int(self.num_labels) or max(2, int(labels.max()) + 1)
        if labels.max() >= n or n < 2:
            raise ParameterError("labels exceed num_labels")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "num_labels", n)
        object.__setattr__(self, "inputs", _inputs(self.inputs, labels.size))

    @property
    def size(self) -> int:
        return self.labels.size

    def predict(self, x) -> int:
        i = as_point(x)
        if not isinstance(i, int) or i >= self.size:
            raise DomainError(f"{x!r} is outside the table's input space of size {self.size}")
        return int(self.labels[i])

    def predict_batch(self, xs) -> np.ndarray:
        idx = np.asarray(xs, dtype=int).ravel()
        if np.any((idx < 0) | (idx >= self.size)):
            raise DomainError("index outside the table's input space")
        return self.labels[idx]


BaseClassifier = Union[Linear, Threshold1D, Table]


def _inputs(inputs, n: int):
    if inputs is None:
        return None
    arr = np.array(inputs, dtype=float)
    arr = arr.reshape(n, -1) if arr.size else arr
    if arr.shape[0] != n:
        raise ParameterError("need one input row per index")
    arr.setflags(write=False)
    return arr


def is_constant(h: BaseClassifier) -> bool:
    """True when ``h`` provably predicts a single label everywhere."""
    if isinstance(h, Table):
        return bool(np.all(h.labels == h.labels[0]))
    if isinstance(h, Linear):
        return bool(np.all(h.weights == h.weights[0]) and np.all(h.bias == h.bias[0]))
    return False


# --------------------------------------------------------------------------
# probabilistic mappings


@dataclasses.dataclass(frozen=True)
class Noise:
    kind: str
    scale: float

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("gaussian", "laplace"):
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ParameterError("noise scale must be positive")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "scale", float(self.scale))

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "gaussian":
            return self.scale * rng.standard_normal(shape)
        return rng.laplace(0.0, self.scale, shape)

    def around(self, x: np.ndarray):
        if self.kind == "gaussian":
            return IsotropicGaussian(x, self.scale)
        return ProductLaplace(x, self.scale)


@dataclasses.dataclass(frozen=True)
class InputNoise:
    """``x -> h(x + noise)``: noise injected before the base classifier."""

    base: BaseClassifier
    noise: Noise

    def __post_init__(self):
        if isinstance(self.base, Table):
            raise ParameterError("input noise needs a classifier on R^k")

    @property
    def raw(self) -> "AdditiveNoise":
        return AdditiveNoise(self.noise, self.base.input_dim)


@dataclasses.dataclass(frozen=True, eq=False)
class OutputNoise:
    """``h(x)`` passed through a label channel: row ``h(x)`` of ``flip_matrix``."""

    base: BaseClassifier
    flip_matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.flip_matrix, dtype=float)
        n = self.base.num_labels
        if m.shape != (n, n):
            raise ParameterError(f"flip matrix must be {n} x {n}")
        if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > SUM_TOL):
            raise ParameterError("flip matrix rows must be probability vectors")
        m.setflags(write=False)
        object.__setattr__(self, "flip_matrix", m)


@dataclasses.dataclass(frozen=True, eq=False)
class FiniteTable:
    """Mapping on ``{0, ..., n-1}``; row ``i`` of ``probs`` is the output law of ``i``."""

    probs: np.ndarray
    inputs: Optional[np.ndarray] = None

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[0] == 0 or p.shape[1] < 2:
            raise ParameterError("probs must be an n x K matrix with K >= 2")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > SUM_TOL):
            raise ParameterError("every row of probs must be a probability vector")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "inputs", _inputs(self.inputs, p.shape[0]))

    @property
    def size(self) -> int:
        return self.probs.shape[0]


@dataclasses.dataclass(frozen=True)
class Deterministic:
    """``x -> Dirac(h(x))``."""

    base: BaseClassifier


@dataclasses.dataclass(frozen=True)
class AdditiveNoise:
    """Raw noise mechanism ``x -> x + noise`` on ``R^dimension``."""

    noise: Noise
    dimension: int = 1


ProbabilisticMapping = Union[InputNoise, OutputNoise, FiniteTable, Deterministic, AdditiveNoise]


@dataclasses.dataclass(frozen=True)
class SmoothedMeasure:
    """Law of ``h(x + noise)`` on ``[N]``, kept symbolic until evaluated."""

    base: BaseClassifier
    noise: Noise
    x: np.ndarray

    has_density = False

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = self.noise.draw(rng, (n, self.x.shape[0]))
        return self.base.predict_batch(self.x + z)

    @property
    def raw(self):
        return self.noise.around(self.x)


def base_of(mapping) -> Optional[BaseClassifier]:
    return getattr(mapping, "base", None)


def num_labels(mapping) -> int:
    if isinstance(mapping, FiniteTable):
        return mapping.probs.shape[1]
    if isinstance(mapping, AdditiveNoise):
        raise CapabilityError("the raw additive mechanism does not output labels")
    return mapping.base.num_labels


def input_size(mapping) -> Optional[int]:
    """Cardinality of a finite input space, or None for ``R^k`` inputs."""
    if isinstance(mapping, FiniteTable):
        return mapping.size
    base = base_of(mapping) if not isinstance(mapping, Table) else mapping
    if isinstance(base, Table):
        return base.size
    return None


def input_dim(mapping) -> int:
    if isinstance(mapping, AdditiveNoise):
        return mapping.dimension
    base = mapping if isinstance(mapping, (Linear, Threshold1D)) else base_of(mapping)
    return base.input_dim


def input_space(mapping, metric: Union[MetricSpec, FiniteSpace]) -> FiniteSpace:
    """Distance table of a finite input space under ``metric``."""
    n = input_size(mapping)
    if n is None:
        raise CapabilityError("mapping has a continuous input space")
    if isinstance(metric, FiniteSpace):
        if metric.size != n:
            raise ParameterError(f"distance table has size {metric.size}, input space has {n}")
        return metric
    holder = mapping if isinstance(mapping, (FiniteTable, Table)) else base_of(mapping)
    inputs = holder.inputs
    if inputs is not None:
        return FiniteSpace.from_points(inputs, metric)
    if metric.kind == "discrete":
        return FiniteSpace.discrete(n)
    raise ParameterError(f"a {metric.kind} metric on a finite space needs input coordinates")


def _check_x(mapping, x):
    n = input_size(mapping)
    if n is not None:
        x = as_point(x)
        if not isinstance(x, int) or x >= n:
            raise DomainError(f"{x!r} is outside the input space of size {n}")
        return x
    return as_point(x, input_dim(mapping))


def apply(mapping: ProbabilisticMapping, x):
    """Output measure of ``mapping`` at ``x``.

    Deterministic classifiers and one-hot channel rows give a
    :class:`Dirac` on the label; tables and channels give a
    :class:`Categorical`; input noise gives a :class:`SmoothedMeasure`.
    """
    x = _check_x(mapping, x)
    if isinstance(mapping, FiniteTable):
        return Categorical(mapping.probs[x])
    if isinstance(mapping, AdditiveNoise):
        return mapping.noise.around(x)
    if isinstance(mapping, InputNoise):
        return SmoothedMeasure(mapping.base, mapping.noise, x)
    label = mapping.base.predict(x)
    if isinstance(mapping, Deterministic):
        return Dirac(label)
    row = mapping.flip_matrix[label]
    if np.count_nonzero(row) == 1:
        return Dirac(int(np.flatnonzero(row)[0]))
    return Categorical(row)


# --------------------------------------------------------------------------
# label distributions


@dataclasses.dataclass(frozen=True)
class Exact:
    pass


@dataclasses.dataclass(frozen=True)
class MonteCarlo:
    n: int
    seed: int = 0
    chunk: int = 1 << 16

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError("Monte Carlo budget needs n >= 1")


EXACT = Exact()


def _exact_probs(mapping, x) -> np.ndarray:
    if isinstance(mapping, FiniteTable):
        return np.array(mapping.probs[x])
    if isinstance(mapping, AdditiveNoise):
        raise CapabilityError("the raw additive mechanism does not output labels")
    base = mapping.base
    if isinstance(mapping, InputNoise):
        if not isinstance(base, Threshold1D):
            raise CapabilityError("exact smoothing is only available for Threshold1D")
        t = (float(x[0]) - base.cut) / mapping.noise.scale
        # P(x + z >= cut) = P(z >= -(x - cut))
        if mapping.noise.kind == "gaussian":
            p1 = 0.5 * math.erfc(-t / math.sqrt(2.0))
        else:
            p1 = 0.5 * math.exp(t) if t < 0 else 1.0 - 0.5 * math.exp(-t)
        return np.array([1.0 - p1, p1])
    label = base.predict(x)
    if isinstance(mapping, Deterministic):
        out = np.zeros(base.num_labels)
        out[label] = 1.0
        return out
    return np.array(mapping.flip_matrix[label])


def _count_chunk(mapping, x, exact: Optional[np.ndarray], k: int, seq, m: int) -> np.ndarray:
    rng = make_rng(seq)
    if isinstance(mapping, InputNoise):
        labels = SmoothedMeasure(mapping.base, mapping.noise, x).sample(rng, m)
    else:
        labels = rng.choice(k, size=m, p=exact)
    return np.bincount(labels, minlength=k)


def label_distribution(mapping: ProbabilisticMapping, x, budget=EXACT, threads: int = 1) -> LabelDistribution:
    """Law of the predicted label at ``x``.

    ``Exact`` is available for tables, label channels, deterministic
    classifiers and Threshold1D under input noise (normal/Laplace CDF).
    ``MonteCarlo(n, seed)`` counts labels over ``n`` draws split into
    fixed-size chunks with per-chunk seeds, so the result does not depend on
    ``threads``; per-label bounds are 95% Clopper-Pearson intervals.
    """
    x = _check_x(mapping, x)
    k = num_labels(mapping)
    if isinstance(budget, Exact):
        return LabelDistribution(_exact_probs(mapping, x))
    exact = None if isinstance(mapping, InputNoise) else _exact_probs(mapping, x)
    sizes = [budget.chunk] * (budget.n // budget.chunk)
    if budget.n % budget.chunk:
        sizes.append(budget.n % budget.chunk)
    jobs = [(child(budget.seed, i), m) for i, m in enumerate(sizes)]
    run = lambda job: _count_chunk(mapping, x, exact, k, *job)
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    counts = np.sum(parts, axis=0)
    probs = counts / budget.n
    lo, hi = clopper_pearson(counts, budget.n)
    lo, hi = np.minimum(lo, probs), np.maximum(hi, probs)
    return LabelDistribution(probs, lo, hi, method="monte_carlo", n=budget.n)
