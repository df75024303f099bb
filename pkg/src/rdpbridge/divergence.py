"""Renyi divergences between probability measures.

Orders are represented by :class:`DivergenceOrder`: a finite ``lambda > 1``,
the Kullback-Leibler limit ``lambda -> 1`` (:data:`KL`) or the max-divergence
limit ``lambda -> inf`` (:data:`MAX`). All logarithms are natural, so values
are in nats, and infinite divergences are returned as ``math.inf``.

Four routes compute a divergence: exact enumeration (categorical), closed
forms (equal-scale Gaussian pairs, Laplace sup-ratios), adaptive Simpson
quadrature on a truncated window (1-D continuous pairs, extended to product
measures coordinate-wise), and a log-domain Monte Carlo estimator with a
bootstrap error bound.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Iterable, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from rdpbridge.errors import CapabilityError, ParameterError, UnsupportedPairError
from rdpbridge.measures import (
    Categorical,
    Dirac,
    Empirical,
    FINITE_FAMILIES,
    IsotropicGaussian,
    LabelDistribution,
    ProductLaplace,
    log_density_ratios,
    sample,
    supports_dominate,
)
from rdpbridge.quadrature import adaptive_simpson
from rdpbridge.rng import SeedLike, child, make_rng

NEG_SLACK = 1e-12
QUAD_TOL = 1e-11
# Window edges are pushed out until the log-integrand is this far below its peak.
_TAIL_DROP = 60.0
LAMBDA_GRID = (1.01, 1.1, 1.5, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
METHODS = ("closed_form", "quadrature", "enumeration", "monte_carlo")


@dataclasses.dataclass(frozen=True)
class DivergenceOrder:
    """Order of a Renyi divergence.

    ``value == 1`` stands for the KL limit and ``value == inf`` for the max
    divergence; any other value must be strictly greater than one.
    """

    value: float

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v) or not (v == 1.0 or v > 1.0):
            raise ParameterError(f"Renyi order must be > 1 (or the KL/max limits), got {self.value!r}")
        object.__setattr__(self, "value", v)

    @property
    def is_kl(self) -> bool:
        return self.value == 1.0

    @property
    def is_max(self) -> bool:
        return math.isinf(self.value)

    @property
    def is_finite(self) -> bool:
        return not (self.is_kl or self.is_max)

    @property
    def label(self) -> str:
        if self.is_kl:
            return "kl"
        if self.is_max:
            return "max"
        return repr(self.value)

    def to_json(self):
        return self.label if not self.is_finite else self.value

    @classmethod
    def parse(cls, spec) -> "DivergenceOrder":
        if isinstance(spec, DivergenceOrder):
            return spec
        if isinstance(spec, str):
            text = spec.strip().lower()
            if text == "kl":
                return KL
            if text in ("max", "inf", "infinity"):
                return MAX
            try:
                return cls(float(text))
            except ValueError:
                raise ParameterError(f"cannot parse divergence order {spec!r}") from None
        return cls(float(spec))


KL = DivergenceOrder(1.0)
MAX = DivergenceOrder(math.inf)
OrderLike = Union[DivergenceOrder, float, int, str]


@dataclasses.dataclass(frozen=True)
class DivergenceResult:
    value: float
    method: str
    error_bound: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        v = float(self.value)
        if math.isnan(v):
            raise ParameterError("divergence evaluated to NaN")
        if v < 0:
            if v < -1e-9:
                raise ParameterError(f"negative divergence {v!r}")
            v = 0.0
        object.__setattr__(self, "value", v)
        if self.method == "monte_carlo" and self.error_bound is None:
            raise ParameterError("Monte Carlo results must carry an error bound")

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "error_bound": self.error_bound}


def _coerce(m):
    if isinstance(m, LabelDistribution):
        return m.as_measure()
    return m


def _check_pair(m1, m2) -> None:
    for m in (m1, m2):
        if isinstance(m, (Dirac, Empirical)):
            raise UnsupportedPairError(f"{type(m).__name__} measures have no density")
    if type(m1) is not type(m2):
        raise UnsupportedPairError(
            f"cannot compare {type(m1).__name__} with {type(m2).__name__}"
        )
    if isinstance(m1, Categorical):
        if m1.size != m2.size:
            raise UnsupportedPairError("categorical measures on different label sets")
    elif m1.dim != m2.dim:
        raise UnsupportedPairError("measures on spaces of different dimension")


# --------------------------------------------------------------------------
# categorical enumeration


def categorical_divergence(p: np.ndarray, q: np.ndarray, order: DivergenceOrder) -> float:
    """Exact divergence between two probability vectors."""
    pos = p > 0
    if np.any(pos & (q <= 0)):
        return math.inf
    lp, lq = np.log(p[pos]), np.log(q[pos])
    if order.is_max:
        value = float(np.max(lp - lq))
    elif order.is_kl:
        value = float(np.sum(p[pos] * (lp - lq)))
    else:
        lam = order.value
        value = float(logsumexp(lam * lp + (1.0 - lam) * lq)) / (lam - 1.0)
    return max(value, 0.0) if value > -NEG_SLACK else value


# --------------------------------------------------------------------------
# closed forms


def gaussian_closed_form(distance: float, sigma: float, order: DivergenceOrder) -> float:
    """Divergence between two Gaussians with common ``sigma`` whose means are
    ``distance`` apart (in L2)."""
    if order.is_max:
        return 0.0 if distance == 0 else math.inf
    ratio = distance * distance / (2.0 * sigma * sigma)
    return ratio if order.is_kl else order.value * ratio


def laplace_closed_form(shift: float, scale: float, order: DivergenceOrder) -> float:
    """Divergence between 1-D Laplace laws of common ``scale`` and locations
    ``shift`` apart."""
    t = abs(shift) / scale
    if order.is_max:
        return t
    if order.is_kl:
        return t + math.expm1(-t)
    lam = order.value
    # log of lam/(2lam-1) e^{(lam-1)t} + (lam-1)/(2lam-1) e^{-lam t}
    a = math.log(lam / (2 * lam - 1)) + (lam - 1) * t
    b = math.log((lam - 1) / (2 * lam - 1)) - lam * t
    return float(np.logaddexp(a, b)) / (lam - 1)


def _gaussian_sup_log_ratio(m1: float, s1: float, m2: float, s2: float) -> float:
    if s1 > s2:
        return math.inf
    if s1 == s2:
        return 0.0 if m1 == m2 else math.inf
    y = (m1 / s1**2 - m2 / s2**2) / (1 / s1**2 - 1 / s2**2)
    return math.log(s2 / s1) - (y - m1) ** 2 / (2 * s1**2) + (y - m2) ** 2 / (2 * s2**2)


def _laplace_sup_log_ratio(m1: float, b1: float, m2: float, b2: float) -> float:
    if b1 > b2:
        return math.inf
    f = lambda y: math.log(b2 / b1) - abs(y - m1) / b1 + abs(y - m2) / b2
    return max(f(m1), f(m2))


# --------------------------------------------------------------------------
# quadrature


def _log_integral(
    logf: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    kinks: Iterable[float] = (),
    noise_scale: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Tuple[float, float]:
    """``log of the integral of exp(logf)`` and its relative error estimate.

    The window ``[lo, hi]`` is widened until the integrand at both edges is
    negligible against its peak; the peak becomes a panel breakpoint so
    narrow integrands are not stepped over.
    """
    kinks = list(kinks)
    if noise_scale is None:
        noise_scale = lambda y: np.abs(logf(y))
    peak = -math.inf
    for _ in range(80):
        grid = np.unique(np.concatenate([np.linspace(lo, hi, 4097), [k for k in kinks if lo < k < hi]]))
        vals = logf(grid)
        peak = float(np.max(vals))
        widened = False
        width = hi - lo
        if logf(np.array([lo]))[0] > peak - _TAIL_DROP:
            lo -= width
            widened = True
        if logf(np.array([hi]))[0] > peak - _TAIL_DROP:
            hi += width
            widened = True
        if not widened:
            break
    else:
        return math.inf, 0.0
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    y_star = float(grid[i])
    if b > a:
        res = minimize_scalar(lambda y: -float(logf(np.array([y]))[0]), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, abs(y_star))})
        if -res.fun > peak:
            peak, y_star = -float(res.fun), float(res.x)
    # logf is a difference of large terms when the two laws are far apart;
    # its rounding noise sets a floor on the attainable tolerance.
    rough = float(np.trapezoid(np.exp(vals - peak), grid))
    noise = 1e3 * np.finfo(float).eps * float(noise_scale(np.array([y_star]))[0]) * rough
    value, err = adaptive_simpson(lambda y: np.exp(logf(y) - peak), lo, hi, tol=max(QUAD_TOL, noise),
                                  breakpoints=kinks + [y_star])
    return peak + math.log(value), err / value


def _gauss_logpdf(m: float, s: float):
    c = -math.log(s) - 0.5 * math.log(2 * math.pi)
    return lambda y: c - 0.5 * ((y - m) / s) ** 2


def _laplace_logpdf(m: float, b: float):
    c = -math.log(2 * b)
    return lambda y: c - np.abs(y - m) / b


def _quad_1d(l1, l2, order: DivergenceOrder, lo: float, hi: float, kinks, tails_ok: bool) -> Tuple[float, float]:
    """Quadrature of one 1-D divergence given the two log-densities."""
    if order.is_kl:
        integrand = lambda y: np.exp(l1(y)) * (l1(y) - l2(y))
        value, err = adaptive_simpson(integrand, lo, hi, tol=QUAD_TOL, breakpoints=kinks)
        return value, err
    lam = order.value
    if not tails_ok:
        return math.inf, 0.0
    log_i, rel = _log_integral(lambda y: lam * l1(y) + (1 - lam) * l2(y), lo, hi, kinks,
                               noise_scale=lambda y: lam * np.abs(l1(y)) + (lam - 1) * np.abs(l2(y)))
    if math.isinf(log_i):
        return math.inf, 0.0
    return log_i / (lam - 1), rel / (lam - 1)


def gaussian_quadrature_1d(m1: float, s1: float, m2: float, s2: float, order: DivergenceOrder) -> Tuple[float, float]:
    if order.is_max:
        return _gaussian_sup_log_ratio(m1, s1, m2, s2), 0.0
    spread = max(s1, s2)
    if order.is_kl:
        lo, hi = m1 - 40 * s1, m1 + 40 * s1
    else:
        lo, hi = min(m1, m2) - 10 * spread, max(m1, m2) + 10 * spread
    tails_ok = order.is_kl or order.value / s1**2 - (order.value - 1) / s2**2 > 0
    return _quad_1d(_gauss_logpdf(m1, s1), _gauss_logpdf(m2, s2), order, lo, hi, [m1, m2], tails_ok)


def laplace_quadrature_1d(m1: float, b1: float, m2: float, b2: float, order: DivergenceOrder) -> Tuple[float, float]:
    if order.is_max:
        return _laplace_sup_log_ratio(m1, b1, m2, b2), 0.0
    spread = max(b1, b2)
    if order.is_kl:
        lo, hi = min(m1, m2) - 60 * b1, max(m1, m2) + 60 * b1
    else:
        lo, hi = min(m1, m2) - 10 * spread, max(m1, m2) + 10 * spread
    tails_ok = order.is_kl or order.value / b1 - (order.value - 1) / b2 > 0
    kinks = sorted({m1, m2})
    return _quad_1d(_laplace_logpdf(m1, b1), _laplace_logpdf(m2, b2), order, lo, hi, kinks, tails_ok)


def _continuous(m1, m2, order: DivergenceOrder, method: str) -> DivergenceResult:
    if isinstance(m1, IsotropicGaussian):
        delta = float(np.linalg.norm(m1.mean - m2.mean))
        if m1.sigma == m2.sigma and method in ("auto", "closed_form"):
            return DivergenceResult(gaussian_closed_form(delta, m1.sigma, order), "closed_form", 0.0)
        if order.is_max:
            value = sum(_gaussian_sup_log_ratio(a, m1.sigma, b, m2.sigma) for a, b in zip(m1.mean, m2.mean))
            return DivergenceResult(value, "closed_form", 0.0)
        if method == "closed_form":
            raise CapabilityError("closed form requires equal Gaussian scales")
        if m1.sigma == m2.sigma:
            pairs = [(0.0, delta)]
        else:
            pairs = list(zip(m1.mean, m2.mean))
        parts = [gaussian_quadrature_1d(float(a), m1.sigma, float(b), m2.sigma, order) for a, b in pairs]
    else:
        if order.is_max:
            value = sum(_laplace_sup_log_ratio(a, m1.scale, b, m2.scale) for a, b in zip(m1.loc, m2.loc))
            return DivergenceResult(value, "closed_form", 0.0)
        if method == "closed_form":
            if m1.scale != m2.scale:
                raise CapabilityError("closed form requires equal Laplace scales")
            value = sum(laplace_closed_form(a - b, m1.scale, order) for a, b in zip(m1.loc, m2.loc))
            return DivergenceResult(value, "closed_form", 0.0)
        parts = []
        cache = {}
        for a, b in zip(m1.loc, m2.loc):
            if m1.scale == m2.scale and a == b:
                continue
            key = float(a - b) if m1.scale == m2.scale else (float(a), float(b))
            if key not in cache:
                if m1.scale == m2.scale:
                    cache[key] = laplace_quadrature_1d(0.0, m1.scale, float(b - a), m2.scale, order)
                else:
                    cache[key] = laplace_quadrature_1d(float(a), m1.scale, float(b), m2.scale, order)
            parts.append(cache[key])
    value = sum(p[0] for p in parts)
    err = sum(p[1] for p in parts)
    if math.isinf(value):
        return DivergenceResult(math.inf, "quadrature", None)
    return DivergenceResult(value, "quadrature", err)


# --------------------------------------------------------------------------
# public API


def renyi_divergence(
    m1,
    m2,
    order: OrderLike = 2.0,
    method: str = "auto",
    *,
    n: int = 100_000,
    seed: SeedLike = 0,
) -> DivergenceResult:
    """Renyi divergence ``D_order(m1 || m2)``.

    ``method`` is ``auto``, ``closed_form``, ``quadrature``, ``enumeration``
    or ``mc``. ``auto`` picks enumeration for categorical pairs, the closed
    form for equal-scale Gaussians and quadrature otherwise. Supremum-type
    quantities (order ``max``) on continuous pairs always use the exact
    sup of the log-ratio.
    """
    order = DivergenceOrder.parse(order)
    m1, m2 = _coerce(m1), _coerce(m2)
    _check_pair(m1, m2)
    if method in ("mc", "monte_carlo"):
        if not order.is_finite:
            raise CapabilityError("Monte Carlo estimation needs a finite order > 1")
        return renyi_monte_carlo(m1, m2, order.value, n, seed)
    if method not in ("auto", "closed_form", "quadrature", "enumeration"):
        raise ParameterError(f"unknown method {method!r}")
    if isinstance(m1, Categorical):
        return DivergenceResult(categorical_divergence(m1.probs, m2.probs, order), "enumeration", 0.0)
    if method == "enumeration":
        raise CapabilityError("enumeration needs finite-support measures")
    return _continuous(m1, m2, order, method)


def kl_divergence(m1, m2, method: str = "auto") -> DivergenceResult:
    return renyi_divergence(m1, m2, KL, method)


def max_divergence(m1, m2, method: str = "auto") -> DivergenceResult:
    """Sup of the log density ratio; ``+inf`` for Gaussians with distinct means."""
    return renyi_divergence(m1, m2, MAX, method)


def renyi_monte_carlo(
    m1,
    m2,
    lam: float,
    n: int,
    seed: SeedLike,
    n_boot: int = 200,
) -> DivergenceResult:
    """Importance-sampling estimate of ``D_lam`` with draws from ``m2``.

    ``(1/(lam-1)) * log(mean_i exp(lam * log(g1/g2)(y_i)))`` evaluated with
    log-sum-exp. ``error_bound`` is the larger distance from the estimate to
    the 2.5% / 97.5% percentiles of ``n_boot`` bootstrap replicates.
    """
    m1, m2 = _coerce(m1), _coerce(m2)
    _check_pair(m1, m2)
    DivergenceOrder(lam)
    if not lam > 1:
        raise ParameterError("Monte Carlo estimation needs lam > 1")
    if int(n) != n or n < 1000:
        raise ParameterError("Monte Carlo estimation needs n >= 1000")
    if n_boot < 200:
        raise ParameterError("at least 200 bootstrap resamples are required")
    n = int(n)
    if not supports_dominate(m1, m2):
        return DivergenceResult(math.inf, "monte_carlo", 0.0)

    ys = sample(m2, child(seed, 0), n)
    boot_rng = make_rng(child(seed, 1))
    if isinstance(m2, Categorical):
        # draws only take finitely many values; resample category counts
        counts = np.bincount(ys, minlength=m2.size)
        support = np.flatnonzero(counts)
        lw = lam * log_density_ratios(m1, m2, support)
        top = float(np.max(lw))
        w = np.exp(lw - top)
        counts = counts[support]
        estimate = (top + math.log(float(counts @ w) / n)) / (lam - 1)
        boots = np.empty(n_boot)
        for b in range(n_boot):
            c = boot_rng.multinomial(n, counts / n)
            boots[b] = (top + math.log(float(c @ w) / n)) / (lam - 1)
    else:
        lw = lam * log_density_ratios(m1, m2, ys)
        top = float(np.max(lw))
        w = np.exp(lw - top)
        estimate = (top + math.log(float(w.sum()) / n)) / (lam - 1)
        boots = np.empty(n_boot)
        for b in range(n_boot):
            idx = boot_rng.integers(0, n, n)
            boots[b] = (top + math.log(float(w[idx].sum()) / n)) / (lam - 1)
    lo, hi = np.percentile(boots, [2.5, 97.5])
    bound = float(max(hi - estimate, estimate - lo, 0.0))
    return DivergenceResult(max(estimate, 0.0), "monte_carlo", bound)


def trivial_distance(m1, m2) -> int:
    """0 if the two measures are equal, 1 otherwise.

    Finite-support measures are compared atom by atom (tolerance 1e-12),
    parametric families by their parameters.
    """
    m1, m2 = _coerce(m1), _coerce(m2)
    finite1, finite2 = isinstance(m1, FINITE_FAMILIES), isinstance(m2, FINITE_FAMILIES)
    if finite1 and finite2:
        a, b = m1.atoms(), m2.atoms()
        keys = set(a) | set(b)
        if any(type(k) is not type(next(iter(keys))) for k in keys):
            raise UnsupportedPairError("atoms live in different spaces")
        same = all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= 1e-12 for k in keys)
        return 0 if same else 1
    if finite1 or finite2:
        raise UnsupportedPairError("cannot compare a finite-support measure with a continuous one")
    if type(m1) is not type(m2) or m1.dim != m2.dim:
        return 1
    if isinstance(m1, IsotropicGaussian):
        same = np.array_equal(m1.mean, m2.mean) and m1.sigma == m2.sigma
    else:
        same = np.array_equal(m1.loc, m2.loc) and m1.scale == m2.scale
    return 0 if same else 1


def categorical_divergence_bounds(p_lo, p_hi, q_lo, q_hi, order: OrderLike) -> Tuple[float, float]:
    """Range of ``D(p || q)`` over probability vectors inside the boxes
    ``p_lo <= p <= p_hi`` and ``q_lo <= q <= q_hi``.

    The bounds are computed term by term and ignore the sum-to-one
    constraint, so they are valid but not tight.
    """
    order = DivergenceOrder.parse(order)
    p_lo, p_hi, q_lo, q_hi = (np.asarray(v, dtype=float) for v in (p_lo, p_hi, q_lo, q_hi))
    live = p_hi > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        if order.is_max:
            hi = float(np.max(np.log(p_hi[live]) - np.log(q_lo[live])))
            lo = float(np.max(np.log(p_lo[live]) - np.log(q_hi[live])))
        elif order.is_kl:
            q_l, q_h = q_lo[live], q_hi[live]
            ends = [np.where(p > 0, p * (np.log(p) - np.log(q_l)), 0.0) for p in (p_lo[live], p_hi[live])]
            hi = float(np.sum(np.maximum(*ends)))
            p_star = np.clip(q_h / math.e, p_lo[live], p_hi[live])
            lo = float(np.sum(np.where(p_star > 0, p_star * (np.log(p_star) - np.log(q_h)), 0.0)))
        else:
            lam = order.value
            hi_terms = lam * np.log(p_hi[live]) + (1 - lam) * np.log(q_lo[live])
            lo_terms = lam * np.log(p_lo[live]) + (1 - lam) * np.log(q_hi[live])
            hi = float(logsumexp(hi_terms)) / (lam - 1)
            lo = float(logsumexp(lo_terms)) / (lam - 1) if np.any(p_lo[live] > 0) else 0.0
    if math.isnan(hi):
        hi = math.inf
    if math.isnan(lo):
        lo = 0.0
    return max(lo, 0.0), max(hi, 0.0)
