"""Probability measures over finite label sets and Euclidean output spaces.

Points are plain Python values: an ``int`` index for finite spaces, or a 1-D
float ``numpy`` array for ``R^k``. :func:`as_point` validates either form.

The dominating measure is fixed per family: counting measure for
:class:`Categorical`, Lebesgue measure for :class:`IsotropicGaussian` and
:class:`ProductLaplace`. :class:`Dirac` and :class:`Empirical` carry no density
and are only usable by sampling and the finite-support comparisons.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Dict, Hashable, Sequence, Tuple, Union

import numpy as np

from rdpbridge.errors import DomainError, ParameterError, UnsupportedPairError
from rdpbridge.rng import SeedLike, make_rng

Point = Union[int, np.ndarray]

SUM_TOL = 1e-12
_LOG_2PI = math.log(2.0 * math.pi)


def as_point(x, dim: int | None = None) -> Point:
    """Validate ``x`` as an index or a finite coordinate vector."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, (bool, np.bool_)):
        if x < 0:
            raise DomainError(f"index points must be non-negative, got {x}")
        return int(x)
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DomainError(f"points must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("point coordinates must be finite")
    if dim is not None and arr.shape[0] != dim:
        raise DomainError(f"expected a point of dimension {dim}, got {arr.shape[0]}")
    return arr


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def _check_simplex(probs: np.ndarray, name: str) -> None:
    if probs.ndim != 1 or probs.size == 0:
        raise ParameterError(f"{name} must be a non-empty vector")
    if np.any(probs < 0):
        raise ParameterError(f"{name} must be non-negative")
    if abs(probs.sum() - 1.0) > SUM_TOL:
        raise ParameterError(f"{name} must sum to 1 (got {probs.sum()!r})")


def _atom_key(p: Point) -> Hashable:
    if isinstance(p, int):
        return p
    return tuple(float(v) for v in p)


@dataclasses.dataclass(frozen=True, eq=False)
class Categorical:
    """Distribution on ``{0, ..., K-1}`` given by its probability vector."""

    probs: np.ndarray

    has_density = True

    def __post_init__(self):
        probs = _frozen(self.probs, "probs")
        _check_simplex(probs, "probs")
        object.__setattr__(self, "probs", probs)

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(self.size, size=n, p=self.probs)

    def log_density(self, y) -> np.ndarray:
        idx = np.asarray(y, dtype=int)
        if np.any((idx < 0) | (idx >= self.size)):
            raise DomainError("index outside the categorical support")
        with np.errstate(divide="ignore"):
            return np.log(self.probs[idx])

    def atoms(self) -> Dict[Hashable, float]:
        return {i: float(p) for i, p in enumerate(self.probs) if p > 0}


@dataclasses.dataclass(frozen=True, eq=False)
class IsotropicGaussian:
    """``N(mean, sigma^2 I)`` on ``R^k``."""

    mean: np.ndarray
    sigma: float

    has_density = True

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(np.atleast_1d(self.mean), "mean"))
        if self.mean.ndim != 1:
            raise ParameterError("mean must be a vector")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ParameterError(f"sigma must be positive, got {self.sigma!r}")
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.mean + self.sigma * rng.standard_normal((n, self.dim))

    def log_density(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1, self.dim)
        sq = np.sum((y - self.mean) ** 2, axis=1)
        return -0.5 * sq / self.sigma**2 - self.dim * (math.log(self.sigma) + 0.5 * _LOG_2PI)


@dataclasses.dataclass(frozen=True, eq=False)
class ProductLaplace:
    """Independent Laplace(loc_i, scale) coordinates on ``R^k``."""

    loc: np.ndarray
    scale: float

    has_density = True

    def __post_init__(self):
        object.__setattr__(self, "loc", _frozen(np.atleast_1d(self.loc), "loc"))
        if self.loc.ndim != 1:
            raise ParameterError("loc must be a vector")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ParameterError(f"scale must be positive, got {self.scale!r}")
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def dim(self) -> int:
        return self.loc.shape[0]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.laplace(self.loc, self.scale, size=(n, self.dim))

    def log_density(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1, self.dim)
        l1 = np.sum(np.abs(y - self.loc), axis=1)
        return -l1 / self.scale - self.dim * math.log(2.0 * self.scale)


@dataclasses.dataclass(frozen=True, eq=False)
class Dirac:
    """Point mass at ``point``."""

    point: Point

    has_density = False

    def __post_init__(self):
        object.__setattr__(self, "point", as_point(self.point))

    def sample(self, rng: np.random.Generator, n: int):
        if isinstance(self.point, int):
            return np.full(n, self.point, dtype=int)
        return np.tile(self.point, (n, 1))

    def atoms(self) -> Dict[Hashable, float]:
        return {_atom_key(self.point): 1.0}


@dataclasses.dataclass(frozen=True, eq=False)
class Empirical:
    """Weighted atoms ``samples[i]`` with mass ``weights[i]``."""

    samples: Tuple[Point, ...]
    weights: np.ndarray

    has_density = False

    def __post_init__(self):
        samples = tuple(as_point(s) for s in self.samples)
        weights = _frozen(self.weights, "weights")
        _check_simplex(weights, "weights")
        if len(samples) != weights.shape[0]:
            raise ParameterError("samples and weights differ in length")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "weights", weights)

    def sample(self, rng: np.random.Generator, n: int):
        idx = rng.choice(len(self.samples), size=n, p=self.weights)
        if isinstance(self.samples[0], int):
            return np.array([self.samples[i] for i in idx], dtype=int)
        return np.stack([self.samples[i] for i in idx])

    def atoms(self) -> Dict[Hashable, float]:
        out: Dict[Hashable, float] = {}
        for s, w in zip(self.samples, self.weights):
            if w > 0:
                key = _atom_key(s)
                out[key] = out.get(key, 0.0) + float(w)
        return out


ProbabilityMeasure = Union[Categorical, IsotropicGaussian, ProductLaplace, Dirac, Empirical]
DENSITY_FAMILIES = (Categorical, IsotropicGaussian, ProductLaplace)
FINITE_FAMILIES = (Categorical, Dirac, Empirical)


@dataclasses.dataclass(frozen=True, eq=False)
class LabelDistribution:
    """Output measure of a randomized classifier on ``[N]``.

    ``lower``/``upper`` hold per-label 95% confidence bounds when the
    probabilities were estimated; for exact distributions they equal ``probs``.
    """

    probs: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    method: str = "exact"
    n: int | None = None

    def __post_init__(self):
        probs = _frozen(self.probs, "probs")
        _check_simplex(probs, "probs")
        if probs.shape[0] < 2:
            raise ParameterError("a label distribution needs at least two labels")
        object.__setattr__(self, "probs", probs)
        lower = probs if self.lower is None else _frozen(self.lower, "lower")
        upper = probs if self.upper is None else _frozen(self.upper, "upper")
        if np.any(lower > probs) or np.any(upper < probs):
            raise ParameterError("confidence bounds must bracket the probabilities")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def num_labels(self) -> int:
        return self.probs.shape[0]

    @property
    def error_bound(self) -> float:
        return float(max(np.max(self.probs - self.lower), np.max(self.upper - self.probs)))

    def as_measure(self) -> Categorical:
        return Categorical(self.probs)


def sample(measure: ProbabilityMeasure, seed: SeedLike, n: int):
    """Draw ``n`` i.i.d. points from ``measure``; deterministic in ``seed``.

    Returns an ``(n,)`` int array for index-valued measures and an ``(n, k)``
    float array for vector-valued ones.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    return measure.sample(make_rng(seed), int(n))


def _same_space(m1, m2) -> None:
    if type(m1) is not type(m2):
        raise UnsupportedPairError(
            f"no common dominating measure for {type(m1).__name__} and {type(m2).__name__}"
        )
    if not isinstance(m1, DENSITY_FAMILIES):
        raise UnsupportedPairError(f"{type(m1).__name__} has no density")
    if isinstance(m1, Categorical):
        if m1.size != m2.size:
            raise UnsupportedPairError("categorical measures on different label sets")
    elif m1.dim != m2.dim:
        raise UnsupportedPairError("measures on spaces of different dimension")


def log_density_ratios(m1, m2, ys) -> np.ndarray:
    """Vectorised :func:`log_density_ratio` over a batch of points."""
    _same_space(m1, m2)
    l1 = m1.log_density(ys)
    l2 = m2.log_density(ys)
    out = np.zeros_like(l1)
    both_zero = np.isneginf(l1) & np.isneginf(l2)
    ok = ~both_zero
    with np.errstate(invalid="ignore"):
        out[ok] = l1[ok] - l2[ok]
    return out


def log_density_ratio(m1, m2, y: Point) -> float:
    """``log g1(y) - log g2(y)``.

    Returns ``+inf`` where only ``g2`` vanishes, ``-inf`` where only ``g1``
    vanishes, and ``0`` where both do (the 0/0 convention).
    """
    if isinstance(m1, Categorical):
        y = as_point(y)
        if not isinstance(y, int):
            raise DomainError("categorical measures take index points")
    else:
        y = as_point(y, getattr(m1, "dim", None))
    return float(log_density_ratios(m1, m2, np.asarray([y]) if isinstance(y, int) else y)[0])


def supports_dominate(m1, m2) -> bool:
    """Whether ``support(m1)`` is contained in ``support(m2)``.

    Gaussian and Laplace measures have full support on ``R^k``. Pairs
    outside the documented domain (finite against continuous, mismatched
    dimensions) return False rather than raising.
    """
    continuous = (IsotropicGaussian, ProductLaplace)
    if isinstance(m1, continuous) and isinstance(m2, continuous):
        return m1.dim == m2.dim
    if isinstance(m1, FINITE_FAMILIES) and isinstance(m2, FINITE_FAMILIES):
        if isinstance(m1, Categorical) and isinstance(m2, Categorical):
            if m1.size != m2.size:
                return False
            return bool(np.all((m1.probs == 0) | (m2.probs > 0)))
        return set(m1.atoms()) <= set(m2.atoms())
    return False
