"""Input-space metrics and finite metric spaces."""

from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from rdpbridge.errors import ParameterError

METRIC_KINDS = ("l1", "l2", "linf", "hamming", "discrete")


@dataclasses.dataclass(frozen=True)
class MetricSpec:
    """A metric on ``R^k`` (or on index points for ``discrete``).

    ``hamming`` counts differing coordinates, which makes two tabular
    databases adjacent exactly when they differ in one row.
    """

    kind: str
    dimension: int = 1

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in METRIC_KINDS:
            raise ParameterError(f"unknown metric kind {self.kind!r}; choose from {METRIC_KINDS}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ParameterError("dimension must be a positive integer")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "dimension", int(self.dimension))

    @property
    def is_norm(self) -> bool:
        return self.kind in ("l1", "l2", "linf")

    def distance(self, x, y) -> float:
        return float(self.pairwise(np.atleast_1d(x)[None], np.atleast_1d(y)[None])[0, 0])

    def pairwise(self, xs, ys=None) -> np.ndarray:
        """Distance matrix between the rows of ``xs`` and ``ys``."""
        xs = np.asarray(xs, dtype=float)
        xs = xs.reshape(len(xs), -1)
        ys = xs if ys is None else np.asarray(ys, dtype=float).reshape(len(ys), -1)
        diff = xs[:, None, :] - ys[None, :, :]
        if self.kind == "l1":
            return np.sum(np.abs(diff), axis=-1)
        if self.kind == "l2":
            return np.sqrt(np.sum(diff * diff, axis=-1))
        if self.kind == "linf":
            return np.max(np.abs(diff), axis=-1)
        if self.kind == "hamming":
            return np.sum(diff != 0, axis=-1).astype(float)
        return np.any(diff != 0, axis=-1).astype(float)

    def norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        if self.kind == "l1":
            return float(np.sum(np.abs(v)))
        if self.kind == "l2":
            return float(np.sqrt(np.sum(v * v)))
        if self.kind == "linf":
            return float(np.max(np.abs(v)))
        raise ParameterError(f"{self.kind} is not a norm")

    def dual_norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        if self.kind == "l1":
            return float(np.max(np.abs(v)))
        if self.kind == "l2":
            return float(np.sqrt(np.sum(v * v)))
        if self.kind == "linf":
            return float(np.sum(np.abs(v)))
        raise ParameterError(f"{self.kind} is not a norm")

    def steepest_direction(self, v) -> np.ndarray:
        """Unit vector ``u`` (in this norm) maximising ``v . u``."""
        v = np.asarray(v, dtype=float)
        if self.kind == "l2":
            return v / np.linalg.norm(v)
        if self.kind == "linf":
            return np.sign(v)
        if self.kind == "l1":
            u = np.zeros_like(v)
            i = int(np.argmax(np.abs(v)))
            u[i] = np.sign(v[i])
            return u
        raise ParameterError(f"{self.kind} is not a norm")

    def random_unit(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` random directions, each of unit length in this norm."""
        if self.kind == "linf":
            g = rng.uniform(-1.0, 1.0, (n, self.dimension))
            g[np.arange(n), rng.integers(0, self.dimension, n)] = rng.choice([-1.0, 1.0], n)
            return g
        g = rng.standard_normal((n, self.dimension))
        norms = np.array([self.norm(row) for row in g])
        return g / norms[:, None]


@dataclasses.dataclass(frozen=True, eq=False)
class FiniteSpace:
    """Input space ``{0, ..., n-1}`` with an explicit distance table."""

    distances: np.ndarray

    def __post_init__(self):
        d = np.array(self.distances, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise ParameterError("distance table must be a non-empty square matrix")
        if np.any(np.isnan(d)) or np.any(d < 0):
            raise ParameterError("distances must be non-negative")
        if np.any(np.diag(d) != 0):
            raise ParameterError("distance table must have a zero diagonal")
        if not np.array_equal(d, d.T):
            raise ParameterError("distance table must be symmetric")
        d.setflags(write=False)
        object.__setattr__(self, "distances", d)

    @classmethod
    def from_points(cls, points: Sequence, metric: MetricSpec) -> "FiniteSpace":
        pts = np.asarray(points, dtype=float).reshape(len(points), -1)
        return cls(metric.pairwise(pts))

    @classmethod
    def discrete(cls, n: int) -> "FiniteSpace":
        return cls(1.0 - np.eye(n))

    @property
    def size(self) -> int:
        return self.distances.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.distances.max())

    def distance(self, i: int, j: int) -> float:
        return float(self.distances[i, j])

    def ball(self, i: int, alpha: float) -> np.ndarray:
        """Indices ``j`` with ``d(i, j) <= alpha`` (closed ball)."""
        return np.flatnonzero(self.distances[i] <= alpha)

    def satisfies_triangle(self, tol: float = 1e-12) -> bool:
        d = self.distances
        return bool(np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + tol))
