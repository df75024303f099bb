"""Adversarial examples, prediction-change risk and robustness estimates.

The prediction-change risk of a classifier ``h`` at radius ``alpha`` is the
probability over ``x ~ D_X`` that the closed ball ``B(x, alpha)`` contains a
point with a different label. The generalized risk of a probabilistic
mapping ``M`` replaces "different label" by "output measure at divergence
greater than ``epsilon``", i.e. ``D(M(x') || M(x)) > epsilon``; with
deterministic mappings and the 0/1 distance on measures the two coincide.

Inner existence questions are answered exhaustively on finite input spaces,
exactly for thresholds and binary linear classifiers, analytically for
additive noise mechanisms, and by search otherwise. A failed search
under-reports, so ``gamma_hat`` is then a lower bound and the report says so.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from rdpbridge.divergence import (
    DivergenceOrder,
    categorical_divergence,
    categorical_divergence_bounds,
    renyi_divergence,
    trivial_distance,
)
from rdpbridge.errors import CapabilityError, ParameterError
from rdpbridge.measures import SUM_TOL, LabelDistribution, Point, as_point
from rdpbridge.mechanisms import (
    EXACT,
    AdditiveNoise,
    BaseClassifier,
    Deterministic,
    Exact,
    FiniteTable,
    InputNoise,
    Linear,
    MonteCarlo,
    OutputNoise,
    Table,
    Threshold1D,
    apply,
    input_dim,
    input_size,
    input_space,
    is_constant,
    label_distribution,
)
from rdpbridge.metrics import FiniteSpace, MetricSpec
from rdpbridge.privacy import _analytic
from rdpbridge.rng import child, make_rng
from rdpbridge.stats import clopper_pearson

log = logging.getLogger(__name__)

TRIVIAL = "trivial"


# --------------------------------------------------------------------------
# data distributions


@dataclasses.dataclass(frozen=True, eq=False)
class FiniteWeighted:
    """Finitely supported data distribution."""

    points: Tuple[Point, ...]
    weights: np.ndarray

    def __post_init__(self):
        pts = tuple(as_point(p) for p in self.points)
        w = np.array(self.weights, dtype=float)
        if w.shape != (len(pts),) or len(pts) == 0:
            raise ParameterError("need one weight per point")
        if np.any(w < 0) or abs(w.sum() - 1.0) > SUM_TOL:
            raise ParameterError("weights must be non-negative and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "FiniteWeighted":
        points = list(points)
        return cls(tuple(points), np.full(len(points), 1.0 / len(points)))


@dataclasses.dataclass(frozen=True)
class Sampler:
    """Continuous data distribution estimated from ``n`` seeded draws.

    ``family`` is ``uniform`` (params ``low``, ``high``) or ``gaussian``
    (params ``mean``, ``std``), with ``dim`` coordinates.
    """

    family: str
    params: Tuple[Tuple[str, float], ...] = ()
    dim: int = 1
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("uniform", "gaussian"):
            raise ParameterError(f"unknown sampler family {self.family!r}")
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))

    def draw(self) -> np.ndarray:
        p = dict(self.params)
        rng = make_rng(self.seed)
        if self.family == "uniform":
            return rng.uniform(p.get("low", -1.0), p.get("high", 1.0), (self.n, self.dim))
        return p.get("mean", 0.0) + p.get("std", 1.0) * rng.standard_normal((self.n, self.dim))


DataDistribution = Union[FiniteWeighted, Sampler]


# --------------------------------------------------------------------------
# attacks


@dataclasses.dataclass(frozen=True)
class AttackBudget:
    """``max_radius`` bounds the search; ``resolution`` is the radial grid step
    used along random directions when no exact method applies."""

    max_radius: float = math.inf
    resolution: float = 1e-3
    n_directions: int = 256
    seed: int = 0


@dataclasses.dataclass(frozen=True)
class AdversarialExample:
    origin: Point
    adversarial: Point
    distance: float
    label_before: int
    label_after: int
    exact: bool

    @property
    def tau(self) -> Optional[np.ndarray]:
        if isinstance(self.origin, int):
            return None
        return self.adversarial - self.origin

    def to_dict(self) -> dict:
        enc = lambda p: p if isinstance(p, int) else [float(v) for v in p]
        return {
            "origin": enc(self.origin),
            "adversarial": enc(self.adversarial),
            "tau": None if self.tau is None else [float(v) for v in self.tau],
            "distance": self.distance,
            "label_before": self.label_before,
            "label_after": self.label_after,
            "exact": self.exact,
        }


def _table_attack(h: Table, i: int, space: FiniteSpace, radius: float):
    d = space.distances[i]
    for j in np.argsort(d, kind="stable"):
        if d[j] > radius:
            break
        if h.labels[j] != h.labels[i]:
            return AdversarialExample(i, int(j), float(d[j]), int(h.labels[i]), int(h.labels[j]), True)
    return None


def _threshold_attack(h: Threshold1D, x: np.ndarray, metric: MetricSpec):
    before = h.predict(x)
    # the label-1 region [cut, inf) is closed, so its boundary point is
    # attained; from above, the nearest label-0 point is the float below cut
    target = h.cut if before == 0 else float(np.nextafter(h.cut, -np.inf))
    xp = np.array([target])
    return AdversarialExample(x, xp, metric.distance(x, xp), before, h.predict(xp), True)


def _exit_along(h: BaseClassifier, x: np.ndarray, u: np.ndarray, before: int, t_hi: float) -> float:
    """Bisection for the first ``t`` in ``(0, t_hi]`` where the label leaves ``before``.

    Requires ``h(x + t_hi u) != before``; relies on the label-``before``
    region being convex along the ray (true for linear classifiers).
    """
    lo, hi = 0.0, t_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if h.predict(x + mid * u) == before:
            lo = mid
        else:
            hi = mid
    return hi


def _escalate(h, x, u, before, t0) -> Optional[float]:
    t = t0
    step = 1e-12 * max(1.0, t0)
    for _ in range(80):
        if h.predict(x + t * u) != before:
            return t
        t = t0 + step
        step *= 2.0
    return None


def _linear_attack(h: Linear, x: np.ndarray, metric: MetricSpec, budget: AttackBudget):
    before = h.predict(x)
    scores = h.scores(x)[0]
    best_t, best_u = math.inf, None
    for j in range(h.num_labels):
        if j == before:
            continue
        dw = h.weights[j] - h.weights[before]
        dn = metric.dual_norm(dw)
        if dn == 0:
            continue
        t0 = max(0.0, scores[before] - scores[j]) / dn
        u = metric.steepest_direction(dw)
        t_hi = _escalate(h, x, u, before, t0)
        if t_hi is None:
            continue
        t = _exit_along(h, x, u, before, t_hi)
        if t < best_t:
            best_t, best_u = t, u
    exact = h.num_labels == 2
    if not exact:
        # several competitors: the nearest change may sit where boundaries
        # meet, so also sweep a radial grid along random directions
        rng = make_rng(budget.seed)
        dirs = metric.random_unit(rng, budget.n_directions)
        reach = min(best_t, budget.max_radius)
        if math.isfinite(reach) and reach > 0:
            radii = np.arange(budget.resolution, reach + budget.resolution, budget.resolution)
            for u in dirs:
                labels = h.predict_batch(x + radii[:, None] * u)
                hit = np.flatnonzero(labels != before)
                if hit.size:
                    t = _exit_along(h, x, u, before, float(radii[hit[0]]))
                    if t < best_t:
                        best_t, best_u = t, u
    if best_u is None:
        return None
    xp = x + best_t * best_u
    return AdversarialExample(x, xp, metric.distance(x, xp), before, h.predict(xp), exact)


def craft_adversarial(
    h: BaseClassifier,
    x,
    metric: Union[MetricSpec, FiniteSpace],
    budget: AttackBudget = AttackBudget(),
) -> Optional[AdversarialExample]:
    """Smallest label-changing perturbation of ``x`` found within ``budget.max_radius``.

    Exact for tables (exhaustive), Threshold1D and binary Linear
    classifiers under L1/L2/Linf; multi-class Linear classifiers combine the
    per-competitor boundary directions with a radial grid and bisection.
    Returns None when no change exists within the radius or ``h`` is constant.
    """
    if is_constant(h):
        log.debug("constant classifier %r: no adversarial example exists", h)
        return None
    if isinstance(h, Table):
        space = input_space(h, metric)
        i = as_point(x)
        h.predict(i)
        return _table_attack(h, i, space, budget.max_radius)
    if isinstance(metric, FiniteSpace) or not metric.is_norm:
        raise ParameterError("attacks on R^k need an l1, l2 or linf metric")
    x = as_point(x, h.input_dim)
    if isinstance(h, Threshold1D):
        ex = _threshold_attack(h, x, metric)
    elif isinstance(h, Linear):
        ex = _linear_attack(h, x, metric, budget)
    else:
        raise ParameterError(f"unsupported classifier {type(h).__name__}")
    if ex is None or ex.distance > budget.max_radius:
        return None
    return ex


def _attack_is_exact(h, metric) -> bool:
    return isinstance(h, (Table, Threshold1D)) or (isinstance(h, Linear) and h.num_labels == 2)


# --------------------------------------------------------------------------
# reports


@dataclasses.dataclass(frozen=True)
class PointResult:
    """Verdict for one data point.

    ``exceeds`` is True/False when decided and None when Monte Carlo error
    bounds straddle the threshold; ``plugin`` is the point-estimate verdict.
    """

    index: int
    weight: float
    exceeds: Optional[bool]
    plugin: bool
    worst: float
    witness: Optional[Point]


@dataclasses.dataclass(frozen=True)
class RobustnessReport:
    alpha: float
    epsilon: Optional[float]
    gamma_hat: float
    ci95: Tuple[float, float]
    n_data: int
    ball_search: str
    divergence_kind: str
    output_space: str = "labels"
    exact: bool = False
    per_point: Tuple[PointResult, ...] = ()

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "gamma_hat": self.gamma_hat,
            "ci95": list(self.ci95),
            "n_data": self.n_data,
            "ball_search": self.ball_search,
            "divergence_kind": self.divergence_kind,
            "output_space": self.output_space,
            "exact": self.exact,
        }

    def write_per_point(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x-id", "worst_divergence_found", "witness_xprime"])
            for r in self.per_point:
                w = "" if r.witness is None else (
                    str(r.witness) if isinstance(r.witness, int) else " ".join(repr(float(v)) for v in r.witness))
                writer.writerow([r.index, repr(float(r.worst)), w])


def _data_points(data: DataDistribution):
    if isinstance(data, FiniteWeighted):
        return list(data.points), np.asarray(data.weights), True
    pts = data.draw()
    return [p for p in pts], np.full(len(pts), 1.0 / len(pts)), False


def _pmap(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _aggregate(results: List[PointResult], finite: bool, lower_bound_only: bool):
    """gamma_hat and 95% interval from per-point verdicts."""
    w = np.array([r.weight for r in results])
    sure = np.array([r.exceeds is True for r in results], dtype=float)
    maybe = np.array([r.exceeds is not False for r in results], dtype=float)
    plug = np.array([r.plugin for r in results], dtype=float)
    if finite:
        gamma = float(np.dot(w, plug))
        lo = float(np.dot(w, sure))
        hi = 1.0 if lower_bound_only else float(np.dot(w, maybe))
    else:
        n = len(results)
        gamma = float(plug.sum()) / n
        lo = float(clopper_pearson(sure.sum(), n)[0])
        hi = 1.0 if lower_bound_only else float(clopper_pearson(maybe.sum(), n)[1])
    # weights summing to 1 + ulp must not push a mass above 1
    gamma, lo, hi = (min(1.0, max(0.0, v)) for v in (gamma, lo, hi))
    return gamma, (min(lo, gamma), max(hi, gamma))


def _label_change(h, x, metric, alpha, budget: AttackBudget):
    """``(changed, witness, distance)`` for the inner existence question."""
    b = dataclasses.replace(budget, max_radius=alpha)
    ex = craft_adversarial(h, x, metric, b)
    if ex is not None and ex.distance <= alpha:
        return True, ex.adversarial, ex.distance
    return False, None, math.inf


def prediction_change_risk(
    h: BaseClassifier,
    data: DataDistribution,
    metric,
    alpha: float,
    budget: AttackBudget = AttackBudget(),
    threads: int = 1,
) -> RobustnessReport:
    """Probability mass of points whose alpha-ball contains a label change."""
    if not alpha >= 0:
        raise ParameterError("alpha must be non-negative")
    points, weights, finite = _data_points(data)
    exact_ball = _attack_is_exact(h, metric) or is_constant(h)

    def one(item):
        i, x = item
        changed, witness, dist = _label_change(h, x, metric, alpha, budget)
        return PointResult(i, float(weights[i]), changed if (changed or exact_ball) else None, changed,
                           1.0 if changed else 0.0, witness)

    results = _pmap(one, list(enumerate(points)), threads)
    # a failed search is not a proof, so non-exact balls only bound from below
    results = [dataclasses.replace(r, exceeds=r.plugin if exact_ball else (True if r.plugin else None))
               for r in results]
    gamma, ci = _aggregate(results, finite, not exact_ball)
    mode = ("enumeration" if isinstance(h, Table) else "exact") if exact_ball else "search (gamma_hat is a lower bound)"
    return RobustnessReport(float(alpha), None, gamma, ci, len(points), mode, TRIVIAL, "labels",
                            finite and exact_ball, tuple(results))


def verdict_from_ci(ci: Tuple[float, float], gamma: float) -> str:
    lo, hi = ci
    if hi <= gamma:
        return "robust"
    if lo > gamma:
        return "not_robust"
    return "inconclusive"


def check_classic_robustness(h, data, metric, alpha: float, gamma: float,
                             budget: AttackBudget = AttackBudget(), threads: int = 1):
    """``((alpha, gamma)-robust verdict, report)``; the verdict is
    ``inconclusive`` when ``gamma`` lies inside the report's interval."""
    report = prediction_change_risk(h, data, metric, alpha, budget, threads)
    return verdict_from_ci(report.ci95, gamma), report


# --------------------------------------------------------------------------
# generalized robustness


@dataclasses.dataclass(frozen=True)
class RobustnessBudget:
    """``labels`` selects exact or Monte Carlo label distributions;
    ``n_candidates`` is the number of ball points tried per data point in
    search mode; ``divergence_method`` is passed to the divergence routine
    for raw noise mechanisms."""

    labels: Union[Exact, MonteCarlo] = EXACT
    n_candidates: int = 257
    attack: AttackBudget = AttackBudget()
    divergence_method: str = "auto"
    seed: int = 0


def _parse_kind(order):
    if isinstance(order, str) and order.strip().lower() == TRIVIAL:
        return TRIVIAL
    return DivergenceOrder.parse(order)


def _candidates(x: np.ndarray, metric: MetricSpec, alpha: float, n: int, rng) -> np.ndarray:
    """Points of the closed ball around ``x``, including its boundary."""
    k = x.shape[0]
    if k == 1:
        return x + np.linspace(-alpha, alpha, n)[:, None]
    n_dirs = max(1, n // 4)
    dirs = np.concatenate([np.eye(k), -np.eye(k), metric.random_unit(rng, n_dirs)])
    radii = alpha * np.array([0.25, 0.5, 0.75, 1.0])
    return (x + (radii[:, None, None] * dirs[None]).reshape(-1, k))


def _label_dist(mapping, x, budget: RobustnessBudget, seed_index: int) -> LabelDistribution:
    labels = budget.labels
    if isinstance(labels, MonteCarlo):
        labels = dataclasses.replace(labels, seed=child(labels.seed, seed_index))
    return label_distribution(mapping, x, labels)


def _compare(a: LabelDistribution, b: LabelDistribution, kind, epsilon: float):
    """``(exceeds or None, plugin exceeds, plug-in value)`` for ``D(a || b) > epsilon``."""
    if kind == TRIVIAL:
        v = float(trivial_distance(a.as_measure(), b.as_measure()))
        return v > epsilon, v > epsilon, v
    v = categorical_divergence(a.probs, b.probs, kind)
    if a.method == "exact" and b.method == "exact":
        return v > epsilon, v > epsilon, v
    lo, hi = categorical_divergence_bounds(a.lower, a.upper, b.lower, b.upper, kind)
    if lo > epsilon:
        return True, True, v
    if hi <= epsilon:
        return False, False, v
    return None, v > epsilon, v


def check_generalized_robustness(
    mapping,
    data: DataDistribution,
    metric,
    alpha: float,
    epsilon: float,
    order="trivial",
    budget: RobustnessBudget = RobustnessBudget(),
    ball_search: str = "auto",
    threads: int = 1,
) -> RobustnessReport:
    """Mass of ``x`` with some ``x'`` in ``B(x, alpha)`` and ``D(M(x') || M(x)) > epsilon``.

    ``order`` is a Renyi order or ``"trivial"`` for the 0/1 distance.
    ``ball_search`` is ``auto`` (exhaustive/exact/analytic where possible)
    or ``search`` to force the candidate search, e.g. to cross-check the
    analytic route for noise mechanisms.
    """
    if not alpha >= 0:
        raise ParameterError("alpha must be non-negative")
    kind = _parse_kind(order)
    kind_label = TRIVIAL if kind == TRIVIAL else kind.label
    points, weights, finite = _data_points(data)
    n_finite = input_size(mapping)

    if n_finite is not None:
        space = input_space(mapping, metric)
        if kind == TRIVIAL:
            outs = [apply(mapping, i) for i in range(n_finite)]
        else:
            outs = [label_distribution(mapping, i, EXACT) for i in range(n_finite)]
        cache = {}

        def pair(j, i):
            if (j, i) not in cache:
                if kind == TRIVIAL:
                    cache[j, i] = float(trivial_distance(outs[j], outs[i]))
                else:
                    cache[j, i] = categorical_divergence(outs[j].probs, outs[i].probs, kind)
            return cache[j, i]

        def one(item):
            idx, x = item
            worst, witness = 0.0, None
            for j in space.ball(x, alpha):
                v = pair(int(j), x)
                if v > worst or witness is None:
                    worst, witness = v, int(j)
            return PointResult(idx, float(weights[idx]), worst > epsilon, worst > epsilon, worst, witness)

        results = [one(it) for it in enumerate(points)]
        gamma, ci = _aggregate(results, finite, False)
        return RobustnessReport(float(alpha), float(epsilon), gamma, ci, len(points), "enumeration",
                                kind_label, "labels", finite, tuple(results))

    if isinstance(mapping, Deterministic) and (kind == TRIVIAL or not math.isinf(epsilon)):
        # outputs are Dirac masses: any label change gives distance 1 under
        # the 0/1 distance and an infinite Renyi divergence
        jump = 1.0 if kind == TRIVIAL else math.inf
        if epsilon < 0:
            results = [PointResult(i, float(weights[i]), True, True, 0.0, x) for i, x in enumerate(points)]
            gamma, ci = _aggregate(results, finite, False)
            return RobustnessReport(float(alpha), float(epsilon), gamma, ci, len(points), "exact", kind_label,
                                    "labels", finite, tuple(results))
        if epsilon >= jump:
            results = [PointResult(i, float(weights[i]), False, False, 0.0, None) for i in range(len(points))]
            gamma, ci = _aggregate(results, finite, False)
            return RobustnessReport(float(alpha), float(epsilon), gamma, ci, len(points), "exact", kind_label,
                                    "labels", finite, tuple(results))
        report = prediction_change_risk(mapping.base, data, metric, alpha, budget.attack, threads)
        results = tuple(dataclasses.replace(r, worst=jump if r.plugin else 0.0) for r in report.per_point)
        return dataclasses.replace(report, epsilon=float(epsilon), divergence_kind=kind_label, per_point=results)

    if isinstance(metric, FiniteSpace) or not metric.is_norm:
        raise ParameterError("continuous input spaces need an l1, l2 or linf metric")

    if isinstance(mapping, AdditiveNoise):
        return _raw_mechanism(mapping, points, weights, finite, metric, alpha, epsilon, kind, kind_label,
                              budget, ball_search, threads)

    rng_root = budget.seed

    def one(item):
        idx, x = item
        x = as_point(x, input_dim(mapping))
        rng = make_rng(child(rng_root, idx))
        base = _label_dist(mapping, x, budget, 2 * idx)
        worst, witness, state, plugin = 0.0, None, False, False
        for c, xp in enumerate(_candidates(x, metric, alpha, budget.n_candidates, rng)):
            other = _label_dist(mapping, xp, budget, 2 * idx + 1 + 2 * (c + 1) * len(points))
            sure, plug, v = _compare(other, base, kind, epsilon)
            plugin = plugin or plug
            if sure is True:
                state = True
            elif sure is None and state is False:
                state = None
            if v > worst or witness is None:
                worst, witness = v, xp
        # the search cannot rule out a violation elsewhere in the ball
        return PointResult(idx, float(weights[idx]), True if state is True else None, plugin, worst, witness)

    results = _pmap(one, list(enumerate(points)), threads)
    gamma, ci = _aggregate(results, finite, True)
    return RobustnessReport(float(alpha), float(epsilon), gamma, ci, len(points),
                            "search (gamma_hat is a lower bound)", kind_label, "labels", False, tuple(results))


def _raw_mechanism(mapping: AdditiveNoise, points, weights, finite, metric, alpha, epsilon, kind, kind_label,
                   budget: RobustnessBudget, ball_search: str, threads: int) -> RobustnessReport:
    k = mapping.dimension
    if kind == TRIVIAL:
        # distinct centres give distinct measures
        worst = 1.0 if alpha > 0 else 0.0
        results = [PointResult(i, float(weights[i]), worst > epsilon, worst > epsilon, worst,
                               None if alpha == 0 else as_point(x, k) + alpha * np.eye(k)[0])
                   for i, x in enumerate(points)]
        gamma, ci = _aggregate(results, finite, False)
        return RobustnessReport(float(alpha), float(epsilon), gamma, ci, len(points), "analytic", kind_label,
                                "raw", finite, tuple(results))

    found = None if ball_search == "search" else _analytic(mapping, metric, alpha, kind)
    if found is not None:
        sup, (o, shifted) = found
        shift = shifted - o
        results = [PointResult(i, float(weights[i]), sup > epsilon, sup > epsilon, sup, as_point(x, k) + shift)
                   for i, x in enumerate(points)]
        gamma, ci = _aggregate(results, finite, False)
        return RobustnessReport(float(alpha), float(epsilon), gamma, ci, len(points), "analytic", kind_label,
                                "raw", finite, tuple(results))

    def one(item):
        idx, x = item
        x = as_point(x, k)
        rng = make_rng(child(budget.seed, idx))
        base = mapping.noise.around(x)
        worst, witness = 0.0, None
        for xp in _candidates(x, metric, alpha, budget.n_candidates, rng):
            v = renyi_divergence(mapping.noise.around(xp), base, kind, budget.divergence_method).value
            if v > worst or witness is None:
                worst, witness = v, xp
        return PointResult(idx, float(weights[idx]), True if worst > epsilon else None, worst > epsilon, worst,
                           witness)

    results = _pmap(one, list(enumerate(points)), threads)
    gamma, ci = _aggregate(results, finite, True)
    return RobustnessReport(float(alpha), float(epsilon), gamma, ci, len(points),
                            "search (gamma_hat is a lower bound)", kind_label, "raw", False, tuple(results))
