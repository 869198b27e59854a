"""Tail bounds governing the random half-split, plus exact combinatorial
oracles that validate them.

The half-split audit's measurement noise is hypergeometric: how many
members of a subgroup land on each side of the split.  The bounds here
convert that into explicit tail probabilities; the exact pmf/cdf oracle
lets tests confirm every bound dominates the truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import HypothesisError, OracleScopeError

#: Largest population the exact hypergeometric oracle accepts; log-gamma
#: evaluation stays stable well past this, the cap just bounds table size.
HYPERGEOM_MAX_POPULATION = 5000


@dataclass(frozen=True)
class HypergeomParams:
    """Sampling s items without replacement from b items, a of them special."""

    b: int
    a: int
    s: int

    def __post_init__(self):
        for name in ("b", "a", "s"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise HypothesisError(f"{name} must be an integer, got {v!r}")
        if not 0 < self.a <= self.b:
            raise HypothesisError(f"need 0 < a <= b, got a={self.a}, b={self.b}")
        if not 0 < self.s <= self.b:
            raise HypothesisError(f"need 0 < s <= b, got s={self.s}, b={self.b}")

    @property
    def mean(self) -> float:
        return self.s * self.a / self.b


def hypergeom_tail_bound(params: HypergeomParams, dev: float) -> float:
    """Deviation bound exp(-2c(dev^2 - 1)) around the mean s*a/b.

    c = max{1/(s+1) + 1/(b-s+1), 1/(a+1) + 1/(b-a+1)}.  One-sided: the
    same expression bounds each tail separately.  Requires dev >= 2.
    """
    if dev < 2:
        raise HypothesisError(f"deviation must be >= 2, got {dev}")
    b, a, s = params.b, params.a, params.s
    c = max(
        1.0 / (s + 1) + 1.0 / (b - s + 1),
        1.0 / (a + 1) + 1.0 / (b - a + 1),
    )
    return min(1.0, math.exp(-2.0 * c * (dev * dev - 1.0)))


@dataclass(frozen=True, eq=False)
class HypergeomTable:
    """Exact pmf/cdf over the support of a hypergeometric count."""

    params: HypergeomParams
    support: np.ndarray
    pmf: np.ndarray
    cdf: np.ndarray

    def pmf_at(self, k: int) -> float:
        lo, hi = int(self.support[0]), int(self.support[-1])
        if k < lo or k > hi:
            return 0.0
        return float(self.pmf[k - lo])

    def cdf_at(self, k: float) -> float:
        """Pr[K <= k] for any real k."""
        j = math.floor(k)
        lo, hi = int(self.support[0]), int(self.support[-1])
        if j < lo:
            return 0.0
        if j >= hi:
            return 1.0
        return float(self.cdf[j - lo])

    def prob_above(self, x: float) -> float:
        """Pr[K > x]."""
        return 1.0 - self.cdf_at(x)

    def prob_below(self, x: float) -> float:
        """Pr[K < x]."""
        return self.cdf_at(math.ceil(x) - 1)

    def mean(self) -> float:
        return float(np.dot(self.support, self.pmf))


def _log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def hypergeom_exact(params: HypergeomParams) -> HypergeomTable:
    """Exact law via log-gamma binomial coefficients.

    Direct factorials overflow long before b = 5000; log space does not.
    The pmf sums to 1 within 1e-10 over the whole admissible range.
    """
    if params.b > HYPERGEOM_MAX_POPULATION:
        raise OracleScopeError(
            f"exact oracle supports b <= {HYPERGEOM_MAX_POPULATION}, got {params.b}"
        )
    b, a, s = params.b, params.a, params.s
    k = np.arange(max(0, s - (b - a)), min(a, s) + 1)
    log_pmf = _log_comb(a, k) + _log_comb(b - a, s - k) - _log_comb(b, s)
    pmf = np.exp(log_pmf)
    cdf = np.minimum(np.cumsum(pmf), 1.0)
    return HypergeomTable(params, k, pmf, cdf)


def mcdiarmid_without_replacement(n: int, m: int, sensitivity: float, t: float) -> float:
    """Upper tail of an order-invariant statistic of an m-of-n sample.

    exp(-(2 t^2 / (m D^2)) * ((n - 1/2)/(n - m)) * (1 - 1/(2 max(m, n-m))))
    for a statistic with per-substitution sensitivity D.
    """
    if not 0 < m < n:
        raise HypothesisError(f"need 0 < m < n, got m={m}, n={n}")
    if sensitivity <= 0:
        raise HypothesisError("sensitivity must be positive")
    if t < 0:
        raise HypothesisError("t must be nonnegative")
    exponent = (
        (2.0 * t * t / (m * sensitivity * sensitivity))
        * ((n - 0.5) / (n - m))
        * (1.0 - 1.0 / (2.0 * max(m, n - m)))
    )
    return min(1.0, math.exp(-exponent))


def mcdiarmid_half_split(n: int, sensitivity: float, t: float) -> float:
    """Clean m = n/2 specialization exp(-4 t^2 / (n D^2)); needs n >= 3.

    Never smaller than the general expression on the m = n/2 line, so it
    is always a valid (slightly looser) upper form.
    """
    if n < 3:
        raise HypothesisError(f"specialization needs n >= 3, got {n}")
    if sensitivity <= 0:
        raise HypothesisError("sensitivity must be positive")
    if t < 0:
        raise HypothesisError("t must be nonnegative")
    return min(1.0, math.exp(-4.0 * t * t / (n * sensitivity * sensitivity)))


@dataclass(frozen=True)
class AzumaBound:
    """A tail probability together with the threshold it applies to."""

    probability: float
    threshold: float


def azuma_tail(n: int, step_bound: float, drift: float, t: float) -> AzumaBound:
    """Pr[sum exceeds n*drift + t*sqrt(n)*step_bound] <= exp(-t^2/2).

    For n terms each bounded by step_bound in magnitude with conditional
    means at most drift.
    """
    if n < 1:
        raise HypothesisError("n must be at least 1")
    if step_bound <= 0:
        raise HypothesisError("step_bound must be positive")
    if t < 0:
        raise HypothesisError("t must be nonnegative")
    return AzumaBound(
        probability=min(1.0, math.exp(-t * t / 2.0)),
        threshold=n * drift + t * math.sqrt(n) * step_bound,
    )


@dataclass(frozen=True)
class IncoherenceBound:
    """A clamped probability bound plus a flag for when it is vacuous."""

    probability: float
    vacuous: bool


def fixed_predictor_min_group_size(alpha: float, mu: float) -> dict[str, float]:
    """Hypothesis terms for the split-independent-predictor gap bound.

    The bound applies once the subgroup size reaches the max of these.
    """
    if not 0 < alpha <= 1:
        raise HypothesisError(f"alpha must be in (0, 1], got {alpha}")
    if mu <= 0:
        raise HypothesisError(f"mu must be positive, got {mu}")
    log_term = math.log(4.0 / mu) if mu < 4.0 else 0.0
    return {
        "alpha_sq": 4.15 * log_term / (alpha * alpha),
        "alpha_inv": 5.3 / alpha,
        "log_linear": 8.3 * log_term,
        "floor": 40.0,
    }


def fixed_predictor_gap_bound(m: int, alpha: float, mu: float) -> IncoherenceBound:
    """Pr[half-split distance > alpha] <= 2*(1 + m)*mu for a predictor
    chosen independently of the split, over a subgroup of size m.

    Raises naming the failing hypothesis term when m is too small; clamps
    to 1 with the vacuous flag set when the bound says nothing.
    """
    terms = fixed_predictor_min_group_size(alpha, mu)
    for name, required in terms.items():
        if m < required:
            raise HypothesisError(
                f"group size {m} is below the {name} hypothesis term {required:.6g}"
            )
    raw = 2.0 * (1 + m) * mu
    return IncoherenceBound(probability=min(1.0, raw), vacuous=raw >= 1.0)
