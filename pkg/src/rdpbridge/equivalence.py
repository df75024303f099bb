"""Exhaustive check of the robustness/privacy equivalence on finite instances.

The robust side asks that no point ``x`` in the data support has an ``x'``
in its closed alpha-ball (over the whole input space) with
``D_lambda(M(x') || M(x)) > epsilon``, i.e. generalized robustness with
``gamma = 0``. The private side is the Renyi-DP pair condition required
only for anchors ``x`` in the data support, with ``x'`` ranging over the
whole space and the divergence taken in the same order. The two sides are
computed by independent code paths (the robustness report and the privacy
certificate), so agreement on random instances exercises both.

Other readings of "almost surely private" are evaluated alongside and
reported without affecting the verdict:

* ``both``: anchors in the support, both divergence directions;
* ``forward``: anchors in the support, ``D(M(x) || M(x'))``;
* ``support_pairs``: both points in the support, both directions;
* ``everywhere``: plain privacy over all pairs of the space.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from rdpbridge.divergence import MAX, DivergenceOrder, OrderLike
from rdpbridge.errors import ParameterError
from rdpbridge.mechanisms import FiniteTable
from rdpbridge.metrics import FiniteSpace, MetricSpec
from rdpbridge.privacy import certify_rdp, finite_divergences
from rdpbridge.rng import child, make_rng
from rdpbridge.robustness import FiniteWeighted, check_generalized_robustness
from rdpbridge.serialization import as_float, dumps

SWEEP_ORDERS = (1.1, 1.5, 2.0, 4.0, 8.0, 32.0, math.inf)
SWEEP_EPSILONS = (0.01, 0.1, 1.0, 10.0)
INTERPRETATION = (
    "private side: D(M(x') || M(x)) <= epsilon for every x in supp(data) and every x' in the "
    "full space with d(x, x') <= alpha; divergence order matches the robust side"
)


@dataclasses.dataclass(frozen=True, eq=False)
class FiniteInstance:
    distances: np.ndarray
    probs: np.ndarray
    weights: np.ndarray
    order: DivergenceOrder
    epsilon: float
    alpha: float

    def __post_init__(self):
        space = FiniteSpace(self.distances)
        if not space.satisfies_triangle():
            raise ParameterError("distance table violates the triangle inequality")
        mapping = FiniteTable(self.probs)
        w = np.array(self.weights, dtype=float)
        if w.shape != (space.size,) or mapping.size != space.size:
            raise ParameterError("mapping, data and distance table must share the input space")
        FiniteWeighted(tuple(range(space.size)), w)
        w.setflags(write=False)
        object.__setattr__(self, "distances", space.distances)
        object.__setattr__(self, "probs", mapping.probs)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "order", DivergenceOrder.parse(self.order))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def size(self) -> int:
        return self.distances.shape[0]

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.weights > 0))

    @property
    def space(self) -> FiniteSpace:
        return FiniteSpace(self.distances)

    @property
    def mapping(self) -> FiniteTable:
        return FiniteTable(self.probs)

    @property
    def data(self) -> FiniteWeighted:
        s = self.support
        w = self.weights[list(s)]
        return FiniteWeighted(s, w / w.sum())

    def to_dict(self) -> dict:
        return {
            "space_size": self.size,
            "metric_table": self.distances,
            "mapping": {"probs": self.probs},
            "data": {"weights": self.weights},
            "lambda": self.order.to_json(),
            "epsilon": self.epsilon,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FiniteInstance":
        keys = {"space_size", "metric_table", "mapping", "data", "lambda", "epsilon", "alpha"}
        if not isinstance(obj, dict) or set(obj) != keys:
            raise ParameterError(f"a finite instance needs exactly the keys {sorted(keys)}")
        inst = cls(obj["metric_table"], obj["mapping"]["probs"], obj["data"]["weights"],
                   DivergenceOrder.parse(obj["lambda"]), as_float(obj["epsilon"]), as_float(obj["alpha"]))
        if inst.size != obj["space_size"]:
            raise ParameterError("space_size does not match the distance table")
        return inst

    def digest(self) -> str:
        return hashlib.sha256(dumps(self.to_dict()).encode()).hexdigest()


@dataclasses.dataclass(frozen=True)
class EquivalenceVerdict:
    robust_side: bool
    private_side: bool
    witness: Optional[Tuple[int, int]]
    interpretation_note: str = INTERPRETATION
    alternates: Tuple[Tuple[str, bool], ...] = ()

    @property
    def agree(self) -> bool:
        return self.robust_side == self.private_side

    def to_dict(self) -> dict:
        return {
            "robust_side": self.robust_side,
            "private_side": self.private_side,
            "agree": self.agree,
            "witness": None if self.witness is None else list(self.witness),
            "interpretation_note": self.interpretation_note,
            "alternates": dict(self.alternates),
        }


def _alternates(inst: FiniteInstance) -> Tuple[Tuple[str, bool], ...]:
    table = finite_divergences(inst.mapping, inst.order)
    near = inst.distances <= inst.alpha
    supp = np.zeros(inst.size, dtype=bool)
    supp[list(inst.support)] = True
    ok = table <= inst.epsilon
    fwd = np.all(ok[near & supp[:, None]])
    rev = np.all(ok.T[near & supp[:, None]])
    pairs = near & supp[:, None] & supp[None, :]
    return (
        ("both", bool(fwd and rev)),
        ("forward", bool(fwd)),
        ("support_pairs", bool(np.all(ok[pairs]) and np.all(ok.T[pairs]))),
        ("everywhere", bool(np.all(ok[near]))),
    )


def evaluate_claim(inst: FiniteInstance, alternates: bool = True) -> EquivalenceVerdict:
    """Both sides of the equivalence on one instance, by full enumeration."""
    report = check_generalized_robustness(inst.mapping, inst.data, inst.space, inst.alpha, inst.epsilon, inst.order)
    robust = bool(report.gamma_hat == 0.0)
    cert = certify_rdp(inst.mapping, inst.space, inst.alpha, inst.order, anchors=inst.support, direction="reverse")
    private = bool(cert.epsilon <= inst.epsilon)
    witness = None
    if not robust:
        bad = next(r for r in report.per_point if r.exceeds)
        witness = (int(inst.support[bad.index]), int(bad.witness))
    elif not private:
        xp, x = cert.witness_pair
        witness = (int(x), int(xp))
    return EquivalenceVerdict(robust, private, witness, alternates=_alternates(inst) if alternates else ())


# --------------------------------------------------------------------------
# random instances


def _random_metric(rng: np.random.Generator, n: int) -> np.ndarray:
    kind = rng.integers(4)
    if kind == 0:
        return 1.0 - np.eye(n)
    if kind == 1:
        # lattice points in the plane give many tied distances
        pts = rng.integers(-3, 4, size=(n, 2)).astype(float)
        name = ("l1", "l2", "linf")[rng.integers(3)]
        return MetricSpec(name, 2).pairwise(pts)
    if kind == 2:
        pts = rng.normal(size=(n, 2))
        return MetricSpec(("l1", "l2", "linf")[rng.integers(3)], 2).pairwise(pts)
    # shortest paths on a random weighted graph completed to a metric
    w = rng.uniform(0.1, 3.0, size=(n, n))
    d = np.triu(w, 1)
    d = d + d.T
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    np.fill_diagonal(d, 0.0)
    return d


def _random_probs(rng: np.random.Generator, n: int) -> np.ndarray:
    k = int(rng.integers(2, 5))
    style = rng.integers(4)
    if style == 0:
        return np.tile(rng.dirichlet(np.ones(k)), (n, 1))  # constant mapping
    p = rng.dirichlet(np.full(k, float(rng.choice([0.3, 1.0, 5.0]))), size=n)
    if style == 1:
        p[rng.random((n, k)) < 0.25] = 0.0  # holes in the support
        p[p.sum(axis=1) == 0, 0] = 1.0
        p = p / p.sum(axis=1, keepdims=True)
    elif style == 2:
        src = rng.integers(n, size=n)  # duplicated rows
        p = p[src]
    return p


def random_instance(seed, size_range: Tuple[int, int] = (2, 8),
                    orders: Sequence[OrderLike] = SWEEP_ORDERS,
                    epsilons: Sequence[float] = SWEEP_EPSILONS) -> FiniteInstance:
    rng = make_rng(seed)
    n = int(rng.integers(size_range[0], size_range[1] + 1))
    d = _random_metric(rng, n)
    probs = _random_probs(rng, n)
    w = rng.random(n)
    if rng.random() < 0.6:
        # strict subset support, at least one point
        w[rng.random(n) < 0.5] = 0.0
        if not np.any(w > 0):
            w[rng.integers(n)] = 1.0
    w = w / w.sum()
    positive = d[d > 0]
    if positive.size and rng.random() < 0.5:
        alpha = float(rng.choice(positive))  # exactly on a ball boundary
    else:
        alpha = float(rng.uniform(0.0, 1.2 * (positive.max() if positive.size else 1.0)))
    order = orders[rng.integers(len(orders))]
    eps = float(epsilons[rng.integers(len(epsilons))])
    return FiniteInstance(d, probs, w, DivergenceOrder.parse(order), eps, alpha)


@dataclasses.dataclass(frozen=True)
class SweepSummary:
    n_instances: int
    agree_count: int
    disagreements: Tuple[str, ...]
    alternate_agree: Tuple[Tuple[str, int], ...]
    seed: int

    def to_dict(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "agree_count": self.agree_count,
            "disagreements": list(self.disagreements),
            "alternate_agree_with_robust_side": dict(self.alternate_agree),
            "seed": self.seed,
            "method": "enumeration",
        }


def random_instance_sweep(
    n_instances: int,
    seed: int = 0,
    size_range: Tuple[int, int] = (2, 8),
    lambda_grid: Sequence[OrderLike] = SWEEP_ORDERS,
    eps_grid: Sequence[float] = SWEEP_EPSILONS,
    threads: int = 1,
    dump_dir: Optional[str] = "disagreements",
) -> SweepSummary:
    """Evaluate ``n_instances`` random instances; instance ``i`` uses seed child ``i``.

    Disagreeing instances are written to ``dump_dir/<sha256>.json``.
    """
    lo, hi = size_range
    if not (1 <= lo <= hi <= 12):
        raise ParameterError("instance sizes must lie in [1, 12]")

    def run(i):
        inst = random_instance(child(seed, i), size_range, lambda_grid, eps_grid)
        return inst, evaluate_claim(inst)

    if threads > 1 and n_instances > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(n_instances)))
    else:
        results = [run(i) for i in range(n_instances)]

    names = ("both", "forward", "support_pairs", "everywhere")
    alt_counts = {k: 0 for k in names}
    bad: List[str] = []
    for inst, verdict in results:
        for name, value in verdict.alternates:
            alt_counts[name] += value == verdict.robust_side
        if not verdict.agree:
            digest = inst.digest()
            bad.append(digest)
            if dump_dir is not None:
                os.makedirs(dump_dir, exist_ok=True)
                with open(os.path.join(dump_dir, digest + ".json"), "w") as fh:
                    fh.write(dumps({"instance": inst.to_dict(), "verdict": verdict.to_dict()}))
    agree = int(sum(v.agree for _, v in results))
    return SweepSummary(n_instances, agree, tuple(bad), tuple(alt_counts.items()), int(seed))
