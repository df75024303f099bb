"""Certification of (Renyi) differential privacy for probabilistic mappings.

A mapping ``M`` is ``(lambda, eps, alpha)``-private under a metric ``d`` when
``D_lambda(M(x) || M(x')) <= eps`` for every ordered pair with
``d(x, x') <= alpha``. :func:`certify_rdp` returns the smallest such ``eps``
(or a lower bound on it when only a search is possible). The max-divergence
order gives metric DP, and the Hamming metric with ``alpha = 1`` gives
classical DP over tabular databases.

Three routes:

* ``analytic``: additive Gaussian / Laplace noise under a norm metric. Input
  noise classifiers are certified through their raw mechanism
  ``x -> x + noise``; post-processing by the classifier cannot increase the
  divergence, so the value is a valid upper bound for the label output.
* ``enumeration``: finite input spaces, every ordered pair in the ball.
* ``search_lower_bound``: random pairs at distance ``alpha`` followed by
  local ascent. The result is a lower bound on the supremum, useful for
  refuting a claimed guarantee but never for establishing one.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from rdpbridge.divergence import (
    DivergenceOrder,
    MAX,
    OrderLike,
    categorical_divergence,
    categorical_divergence_bounds,
    gaussian_closed_form,
    laplace_closed_form,
    renyi_divergence,
)
from rdpbridge.errors import CapabilityError, ParameterError
from rdpbridge.measures import LabelDistribution
from rdpbridge.mechanisms import (
    EXACT,
    AdditiveNoise,
    FiniteTable,
    InputNoise,
    MonteCarlo,
    input_dim,
    input_size,
    input_space,
    label_distribution,
)
from rdpbridge.metrics import FiniteSpace, MetricSpec
from rdpbridge.rng import make_rng

DIRECTIONS = ("both", "forward", "reverse")


@dataclasses.dataclass(frozen=True)
class SearchBudget:
    """Budget of the pair search used when no exact route applies.

    First points are drawn uniformly from ``[-box, box]^k``. Label
    distributions without an exact form are estimated from ``mc_samples``
    draws and enter the search through their conservative lower divergence
    bound.
    """

    n_pairs: int = 512
    n_steps: int = 64
    box: float = 2.0
    seed: int = 0
    mc_samples: int = 2000

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class RdpCertificate:
    """``witness_pair`` is ``(x, x')`` with ``D(M(x) || M(x')) == epsilon``."""

    order: DivergenceOrder
    epsilon: float
    alpha: float
    metric: str
    method: str
    witness_pair: Optional[Tuple] = None
    warnings: Tuple[str, ...] = ()
    search: Optional[dict] = None
    note: str = ""

    @property
    def is_upper_bound(self) -> bool:
        return self.method in ("analytic", "enumeration")

    def holds(self, epsilon: float) -> Optional[bool]:
        """True/False when decidable, None when the search found no violation."""
        if self.epsilon > epsilon:
            return False
        return True if self.is_upper_bound else None

    def to_dict(self) -> dict:
        witness = None
        if self.witness_pair is not None:
            witness = [w if isinstance(w, int) else [float(v) for v in w] for w in self.witness_pair]
        return {
            "lambda": self.order.to_json(),
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "metric": self.metric,
            "method": self.method,
            "witness_pair": witness,
            "warnings": list(self.warnings),
            "search": self.search,
            "note": self.note,
        }


@dataclasses.dataclass(frozen=True)
class DpVerdict:
    status: str  # "holds", "violated" or "inconclusive"
    epsilon: float
    certificate: RdpCertificate

    @property
    def witness(self):
        return self.certificate.witness_pair if self.status == "violated" else None

    def to_dict(self) -> dict:
        return {"status": self.status, "epsilon": self.epsilon, "certificate": self.certificate.to_dict()}


def _metric_name(metric) -> str:
    return "table" if isinstance(metric, FiniteSpace) else metric.kind


def _label_probs(mapping, x) -> np.ndarray:
    return label_distribution(mapping, x, EXACT).probs


def finite_divergences(mapping, order: OrderLike) -> np.ndarray:
    """Matrix ``D[i, j] = D(M(i) || M(j))`` over a finite input space."""
    order = DivergenceOrder.parse(order)
    n = input_size(mapping)
    rows = [_label_probs(mapping, i) for i in range(n)]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                out[i, j] = categorical_divergence(rows[i], rows[j], order)
    return out


def _enumerate(mapping, space: FiniteSpace, alpha, order, anchors, direction):
    table = finite_divergences(mapping, order)
    anchors = range(space.size) if anchors is None else anchors
    best, witness = 0.0, None
    for i in anchors:
        for j in space.ball(int(i), alpha):
            j = int(j)
            candidates = []
            if direction in ("both", "forward"):
                candidates.append((table[i, j], (int(i), j)))
            if direction in ("both", "reverse"):
                candidates.append((table[j, i], (j, int(i))))
            for value, pair in candidates:
                if value > best:
                    best, witness = value, pair
    return best, witness


def _analytic(mapping, metric: MetricSpec, alpha: float, order: DivergenceOrder):
    """Exact sup for additive noise, or None when no closed form applies."""
    raw = mapping.raw if isinstance(mapping, InputNoise) else mapping
    k, noise = raw.dimension, raw.noise
    if not metric.is_norm:
        return None
    if noise.kind == "gaussian":
        # worst shift has the largest L2 norm inside the metric ball
        if metric.kind == "linf":
            shift = np.full(k, alpha)
        else:
            shift = np.zeros(k)
            shift[0] = alpha
        eps = gaussian_closed_form(float(np.linalg.norm(shift)), noise.scale, order)
    else:
        # worst shift has the largest L1 norm; for finite orders the
        # per-coordinate divergence is increasing so corners of the box are
        # worst, while L1/L2 balls need the split that is only known for D_inf
        if metric.kind == "linf" or k == 1:
            shift = np.full(k, alpha)
            eps = k * laplace_closed_form(alpha, noise.scale, order)
        elif order.is_max:
            shift = np.zeros(k)
            if metric.kind == "l1":
                shift[0] = alpha
            else:
                shift[:] = alpha / math.sqrt(k)
            eps = float(np.sum(np.abs(shift))) / noise.scale
        else:
            return None
    origin = np.zeros(k)
    return eps, (origin, origin + shift)


def _output(mapping, x, budget: SearchBudget, rng_seed: int):
    if isinstance(mapping, AdditiveNoise):
        return mapping.noise.around(x)
    try:
        return label_distribution(mapping, x, EXACT)
    except CapabilityError:
        return label_distribution(mapping, x, MonteCarlo(budget.mc_samples, rng_seed))


def _pair_value(m1, m2, order: DivergenceOrder) -> float:
    """Divergence of two outputs, a lower bound when either is estimated."""
    if isinstance(m1, LabelDistribution):
        if m1.method == "exact" and m2.method == "exact":
            return categorical_divergence(m1.probs, m2.probs, order)
        return categorical_divergence_bounds(m1.lower, m1.upper, m2.lower, m2.upper, order)[0]
    return renyi_divergence(m1, m2, order).value


def _search(mapping, metric: MetricSpec, alpha: float, order, direction, budget: SearchBudget):
    if not metric.is_norm:
        raise ParameterError(f"pair search needs a norm metric, not {metric.kind}")
    rng = make_rng(budget.seed)
    k = input_dim(mapping)
    counter = [0]

    def value(x, u):
        xp = x + alpha * u
        counter[0] += 1
        a = _output(mapping, x, budget, counter[0])
        b = _output(mapping, xp, budget, counter[0] + (1 << 30))
        vals = []
        if direction in ("both", "forward"):
            vals.append((_pair_value(a, b, order), (x, xp)))
        if direction in ("both", "reverse"):
            vals.append((_pair_value(b, a, order), (xp, x)))
        return max(vals, key=lambda t: t[0])

    def unit(v):
        n = metric.norm(v)
        return v / n if n > 0 else metric.random_unit(rng, 1)[0]

    best, witness = 0.0, None
    step = 0.25 * max(budget.box, alpha, 1e-12)
    for _ in range(budget.n_pairs):
        x = rng.uniform(-budget.box, budget.box, k)
        u = metric.random_unit(rng, 1)[0]
        cur, pair = value(x, u)
        s = step
        for _ in range(budget.n_steps):
            cx = x + s * rng.standard_normal(k)
            cu = unit(u + 0.5 * rng.standard_normal(k))
            v, p = value(cx, cu)
            if v > cur:
                x, u, cur, pair = cx, cu, v, p
            else:
                s *= 0.9
        if cur > best:
            best, witness = cur, pair
    return best, witness


def certify_rdp(
    mapping,
    metric: Union[MetricSpec, FiniteSpace],
    alpha: float,
    order: OrderLike,
    *,
    search: SearchBudget = SearchBudget(),
    anchors: Optional[Iterable[int]] = None,
    direction: str = "both",
    force_search: bool = False,
) -> RdpCertificate:
    """Smallest ``eps`` with ``D_order(M(x) || M(x')) <= eps`` on the alpha-ball.

    ``direction="both"`` evaluates every ordered pair. On finite spaces
    ``anchors`` restricts one element of each pair to the given indices:
    ``forward`` uses ``D(M(anchor) || M(x'))`` and ``reverse`` uses
    ``D(M(x') || M(anchor))``.
    """
    order = DivergenceOrder.parse(order)
    if not (alpha >= 0):
        raise ParameterError("alpha must be non-negative")
    if direction not in DIRECTIONS:
        raise ParameterError(f"direction must be one of {DIRECTIONS}")
    name = _metric_name(metric)
    alpha = float(alpha)

    if input_size(mapping) is not None:
        space = input_space(mapping, metric)
        warnings = ()
        if alpha > space.diameter:
            warnings = (f"alpha {alpha!r} exceeds the space diameter {space.diameter!r}; every pair is in range",)
        eps, witness = _enumerate(mapping, space, alpha, order, anchors, direction)
        return RdpCertificate(order, eps, alpha, name, "enumeration", witness, warnings)

    if isinstance(metric, FiniteSpace):
        raise ParameterError("a distance table needs a mapping on a finite input space")
    if alpha == 0:
        return RdpCertificate(order, 0.0, alpha, name, "analytic", note="x' = x is the only pair")
    if isinstance(mapping, (AdditiveNoise, InputNoise)) and not force_search:
        found = _analytic(mapping, metric, alpha, order)
        if found is not None:
            eps, witness = found
            note = "raw mechanism x -> x + noise" if isinstance(mapping, InputNoise) else ""
            return RdpCertificate(order, eps, alpha, name, "analytic", witness if eps > 0 else None, note=note)
    eps, witness = _search(mapping, metric, alpha, order, direction, search)
    return RdpCertificate(order, eps, alpha, name, "search_lower_bound", witness, search=search.to_dict(),
                          note="lower bound on the supremum")


def certify_metric_dp(mapping, metric, alpha: float, epsilon: float, **kwargs) -> DpVerdict:
    """Decide ``(epsilon, alpha)``-metric DP via the max-divergence certificate."""
    cert = certify_rdp(mapping, metric, alpha, MAX, **kwargs)
    verdict = cert.holds(epsilon)
    status = "inconclusive" if verdict is None else ("holds" if verdict else "violated")
    return DpVerdict(status, float(epsilon), cert)


def certify_classical_dp(mapping: FiniteTable, epsilon: float) -> DpVerdict:
    """Classical epsilon-DP: databases differing in one row, i.e. Hamming distance 1.

    ``mapping.inputs`` holds one database per row.
    """
    if not isinstance(mapping, FiniteTable) or mapping.inputs is None:
        raise ParameterError("classical DP needs a FiniteTable whose inputs are database rows")
    metric = MetricSpec("hamming", mapping.inputs.shape[1])
    return certify_metric_dp(mapping, metric, 1.0, epsilon)
