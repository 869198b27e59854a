"""Closed-form calculators converting privacy budgets into enforced
minimum subgroup sizes.

The chain runs: a differential-privacy budget bounds the curator's
max-information, and a max-information budget of zeta nats forces every
audited subgroup of size at least gamma to show coherent predictions
except with probability beta.  Everything here is a pure function of its
arguments; natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HypothesisError, InfeasibleTargetError, OracleScopeError

#: Theorem range caps on epsilon for the inverse solver.
PURE_EPSILON_CAP = 1.0
APPROX_EPSILON_CAP = 0.5

#: Relative width at which the inverse bisection stops.
INVERT_REL_TOL = 1e-9

#: Largest joint table (total cells) the exhaustive oracle accepts.
MAXINFO_ORACLE_MAX_CELLS = 20


@dataclass(frozen=True)
class CoherenceParams:
    """Audit-side parameters shared by the subgroup-size calculators.

    alpha: distance threshold, in (0, 1] (the calculators are stated for
        this range even though the audit itself accepts up to 2).
    beta: incoherence probability budget, in (0, 1).
    collection_size: number of audited subpopulations, >= 1.
    n: total dataset size; the curator ingests n/2 records.  May be None
        for the pure max-information formula, which does not use it.
    """

    alpha: float
    beta: float
    collection_size: int
    n: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise HypothesisError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 < self.beta < 1:
            raise HypothesisError(f"beta must be in (0, 1), got {self.beta}")
        if self.collection_size < 1:
            raise HypothesisError(
                f"collection_size must be >= 1, got {self.collection_size}"
            )
        if self.n is not None and self.n < 2:
            raise HypothesisError(f"n must be >= 2, got {self.n}")

    def require_n(self) -> float:
        if self.n is None:
            raise HypothesisError("this calculator needs the total dataset size n")
        return float(self.n)


@dataclass(frozen=True)
class MaxInfoBudget:
    """A max-information bound in nats at some approximation level.

    The generalized approximate-DP conversion can emit failure levels at
    or above 1 at legal hypothesis points; such budgets are vacuous and
    flagged rather than rejected.
    """

    zeta: float
    failure: float

    def __post_init__(self):
        if self.zeta < 0:
            raise HypothesisError(f"zeta must be nonnegative, got {self.zeta}")
        if self.failure < 0:
            raise HypothesisError(f"failure must be nonnegative, got {self.failure}")

    @property
    def vacuous(self) -> bool:
        return self.failure >= 1.0


@dataclass(frozen=True)
class BoundResult:
    """A required minimum subgroup size with evaluation diagnostics.

    gamma is returned as a real; callers compare subgroup sizes with >=
    so no rounding dispute can arise at boundaries.
    """

    gamma: float
    active_term: str
    terms: dict[str, float]
    inputs: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "active_term": self.active_term,
            "terms": dict(self.terms),
            "inputs": dict(self.inputs),
        }


def gamma_from_maxinfo(zeta: float, params: CoherenceParams) -> BoundResult:
    """Minimum subgroup size enforced by a max-information budget.

    gamma = max( 8.3 * (zeta + ln(16 C / beta)) / alpha^2,
                 36 * ln(3 / alpha) / alpha^2,
                 16.6 * (zeta + ln(16 C / beta)),
                 5.3 / alpha,
                 80 )

    The budget must hold at approximation level beta / (2 C); that is a
    documented contract on the caller, not checkable here.
    """
    if zeta < 0:
        raise HypothesisError(f"zeta must be nonnegative, got {zeta}")
    a, b, csize = params.alpha, params.beta, params.collection_size
    load = zeta + math.log(16.0 * csize / b)
    terms = {
        "alpha_sq": 8.3 * load / (a * a),
        "alpha_log": 36.0 * math.log(3.0 / a) / (a * a),
        "zeta_linear": 16.6 * load,
        "alpha_inv": 5.3 / a,
        "floor": 80.0,
    }
    active = max(terms, key=terms.get)
    return BoundResult(
        gamma=terms[active],
        active_term=active,
        terms=terms,
        inputs={"zeta": zeta, "alpha": a, "beta": b, "collection_size": csize},
    )


def maxinfo_pure_dp(epsilon: float, n: float, failure: float) -> MaxInfoBudget:
    """Budget of an order-invariant epsilon-DP curator ingesting half of
    an n-record dataset: zeta = eps^2 n / 4 + eps sqrt(n ln(2/failure) / 4).

    Order-invariance is a documented contract on the curator (any curator
    can be made order-invariant by shuffling its input first).
    """
    if epsilon < 0:
        raise HypothesisError(f"epsilon must be nonnegative, got {epsilon}")
    if not 0 < failure < 1:
        raise HypothesisError(f"failure must be in (0, 1), got {failure}")
    if n < 2:
        raise HypothesisError(f"n must be >= 2, got {n}")
    zeta = epsilon * epsilon * n / 4.0 + epsilon * math.sqrt(
        n * math.log(2.0 / failure) / 4.0
    )
    return MaxInfoBudget(zeta=zeta, failure=failure)


def maxinfo_approx_dp_general(
    epsilon: float, delta: float, delta_hat: float, t: float, n: float
) -> MaxInfoBudget:
    """Generalized approximate-DP conversion for an n-record sample drawn
    without replacement.

    zeta    = n (347 dh + 75 (dh/eps)^2 + 24 dh^2/eps + 240 eps^2)
              + 6 t eps sqrt(n)
    failure = e^{-t^2/2} + n (2 delta/dh + (2 dh + 2 delta)/(1 - e^{-3 eps}))

    Returns both as one budget; check .vacuous before trusting the level.
    """
    if not 0 < epsilon <= 0.5:
        raise HypothesisError(f"epsilon must be in (0, 1/2], got {epsilon}")
    if not 0 < delta < epsilon:
        raise HypothesisError(f"delta must be in (0, epsilon), got {delta}")
    if not 0 < delta_hat <= epsilon / 15.0:
        raise HypothesisError(
            f"delta_hat must be in (0, epsilon/15] = (0, {epsilon / 15.0:.6g}], got {delta_hat}"
        )
    if t <= 0:
        raise HypothesisError(f"t must be positive, got {t}")
    if n < 1:
        raise HypothesisError(f"n must be >= 1, got {n}")
    dh = delta_hat
    zeta = n * (
        347.0 * dh
        + 75.0 * (dh / epsilon) ** 2
        + 24.0 * dh * dh / epsilon
        + 240.0 * epsilon * epsilon
    ) + 6.0 * t * epsilon * math.sqrt(n)
    failure = math.exp(-t * t / 2.0) + n * (
        2.0 * delta / dh + (2.0 * dh + 2.0 * delta) / (1.0 - math.exp(-3.0 * epsilon))
    )
    return MaxInfoBudget(zeta=zeta, failure=failure)


def approx_dp_delta_ceiling(epsilon: float, failure: float, n: float) -> float:
    """Largest admissible delta for the consolidated conversion."""
    return epsilon * epsilon * failure * failure / (120.0 * n) ** 2


def maxinfo_approx_dp(epsilon: float, delta: float, failure: float, n: float) -> MaxInfoBudget:
    """Consolidated-constants conversion for an n-record sample:
    zeta = 265 eps^2 n + 12 eps sqrt(n ln(2/failure)),
    admissible only for delta <= eps^2 failure^2 / (120 n)^2.
    """
    if not 0 < epsilon <= 0.5:
        raise HypothesisError(f"epsilon must be in (0, 1/2], got {epsilon}")
    if not 0 < failure <= 1:
        raise HypothesisError(f"failure must be in (0, 1], got {failure}")
    if n < 1:
        raise HypothesisError(f"n must be >= 1, got {n}")
    ceiling = approx_dp_delta_ceiling(epsilon, failure, n)
    if not 0 < delta <= ceiling:
        raise HypothesisError(
            f"delta must lie in (0, {ceiling:.6g}] for epsilon={epsilon}, "
            f"failure={failure}, n={n}; got {delta}"
        )
    zeta = 265.0 * epsilon * epsilon * n + 12.0 * epsilon * math.sqrt(
        n * math.log(2.0 / failure)
    )
    return MaxInfoBudget(zeta=zeta, failure=failure)


def gamma_pure_dp(epsilon: float, params: CoherenceParams) -> BoundResult:
    """Subgroup size enforced by an order-invariant epsilon-DP curator.

    Composes the pure-DP conversion at failure level beta/(2 C) with the
    max-information subgroup-size formula; identical to evaluating the
    composed closed form directly.
    """
    if not 0 < epsilon <= PURE_EPSILON_CAP:
        raise HypothesisError(f"epsilon must be in (0, 1], got {epsilon}")
    n = params.require_n()
    budget = maxinfo_pure_dp(epsilon, n, params.beta / (2.0 * params.collection_size))
    result = gamma_from_maxinfo(budget.zeta, params)
    inputs = dict(result.inputs)
    inputs.update({"epsilon": epsilon, "n": n, "regime": "pure"})
    return BoundResult(result.gamma, result.active_term, result.terms, inputs)


def gamma_approx_dp(
    epsilon: float,
    delta: float,
    params: CoherenceParams,
    formula: str = "proof",
) -> BoundResult:
    """Subgroup size enforced by an order-invariant (epsilon, delta)-DP
    curator, for delta <= eps^2 beta^2 / ((120 n)^2 C^2).

    The canonical path ("proof") composes the consolidated conversion at
    failure beta/(2 C) on the curator's n/2-record input, i.e.
    zeta = (265/2) eps^2 n + 12 eps sqrt((n/2) ln(4 C / beta)).

    Two published alternates of the same statement carry different
    consolidated constants; they are retained verbatim for reproduction
    as formula="printed-265" and formula="printed-133" (these use the
    total n, ln(32 C / beta), and a 16/3 / alpha term).
    """
    if not 0 < epsilon <= APPROX_EPSILON_CAP:
        raise HypothesisError(f"epsilon must be in (0, 1/2], got {epsilon}")
    n = params.require_n()
    csize = params.collection_size
    ceiling = epsilon * epsilon * params.beta * params.beta / (
        (120.0 * n) ** 2 * csize * csize
    )
    if not 0 < delta <= ceiling:
        raise HypothesisError(
            f"delta must lie in (0, {ceiling:.6g}] for epsilon={epsilon}, "
            f"beta={params.beta}, n={n}, collection_size={csize}; got {delta}"
        )
    if formula == "proof":
        budget = maxinfo_approx_dp(
            epsilon, delta, params.beta / (2.0 * csize), n / 2.0
        )
        result = gamma_from_maxinfo(budget.zeta, params)
        inputs = dict(result.inputs)
        inputs.update(
            {"epsilon": epsilon, "delta": delta, "n": n, "regime": "approx",
             "formula": formula}
        )
        return BoundResult(result.gamma, result.active_term, result.terms, inputs)
    if formula in ("printed-265", "printed-133"):
        c1, c2 = (265.0, 12.0) if formula == "printed-265" else (133.0, 9.0)
        a, b = params.alpha, params.beta
        load = (
            c1 * epsilon * epsilon * n
            + c2 * epsilon * math.sqrt(n * math.log(4.0 * csize / b))
            + math.log(32.0 * csize / b)
        )
        terms = {
            "alpha_sq": 8.3 * load / (a * a),
            "alpha_log": 36.0 * math.log(3.0 / a) / (a * a),
            "zeta_linear": 16.6 * load,
            "alpha_inv": (16.0 / 3.0) / a,
            "floor": 80.0,
        }
        active = max(terms, key=terms.get)
        return BoundResult(
            gamma=terms[active],
            active_term=active,
            terms=terms,
            inputs={
                "epsilon": epsilon, "delta": delta, "alpha": a, "beta": b,
                "collection_size": csize, "n": n, "regime": "approx",
                "formula": formula,
            },
        )
    raise HypothesisError(
        f"unknown formula {formula!r}; expected 'proof', 'printed-265' or 'printed-133'"
    )


def max_epsilon_for(
    target_gamma: float,
    params: CoherenceParams,
    regime: str = "pure",
    delta: float | None = None,
) -> float:
    """Largest epsilon whose enforced subgroup size stays at or below the
    target, found by bisection to 1e-9 relative width.

    The enforced gamma is nondecreasing in epsilon, so the feasible set is
    an interval.  Returns the theorem's range cap when even that is
    feasible; raises naming the blocking term when no epsilon works.
    """
    if regime == "pure":
        cap = PURE_EPSILON_CAP
        gamma_at = lambda e: gamma_pure_dp(e, params).gamma
        floor_result = gamma_from_maxinfo(0.0, params)
        lo = 1e-12
    elif regime == "approx":
        if delta is None:
            raise HypothesisError("the approx regime needs a delta")
        cap = APPROX_EPSILON_CAP
        gamma_at = lambda e: gamma_approx_dp(e, delta, params).gamma
        n = params.require_n()
        # Smallest epsilon at which this delta is admissible.
        lo = 120.0 * n * params.collection_size * math.sqrt(delta) / params.beta
        lo *= 1.0 + 1e-12
        if lo > cap:
            raise InfeasibleTargetError(
                f"delta={delta} is inadmissible for every epsilon in (0, {cap}]",
                blocking_term="delta_ceiling",
            )
        floor_result = gamma_approx_dp(lo, delta, params)
    else:
        raise HypothesisError(f"unknown regime {regime!r}")

    if floor_result.gamma > target_gamma:
        raise InfeasibleTargetError(
            f"target gamma {target_gamma} is below the epsilon-free minimum "
            f"{floor_result.gamma:.6g}; blocking term "
            f"{floor_result.active_term} = {floor_result.terms[floor_result.active_term]:.6g}",
            blocking_term=floor_result.active_term,
        )
    if gamma_at(cap) <= target_gamma:
        return cap
    hi = cap
    while hi - lo > INVERT_REL_TOL * hi:
        mid = 0.5 * (lo + hi)
        if gamma_at(mid) <= target_gamma:
            lo = mid
        else:
            hi = mid
    return lo


def exact_max_information(joint, beta_level: float) -> float:
    """Exhaustive dependence measure for a tiny joint outcome table.

    ln of the sup over outcome sets T with P[T] > beta_level of
    (P[T] - beta_level) / Q[T], where P is the joint law and Q the product
    of its marginals.  Walks all 2^k cell subsets (k <= 20 cells) with a
    Gray code so each step is O(1).

    Returns -inf when no subset clears the probability threshold, and
    +inf when a qualifying subset has zero product-measure.
    """
    table = np.asarray(joint, dtype=np.float64)
    if table.ndim != 2:
        raise HypothesisError("joint table must be two-dimensional")
    if table.size > MAXINFO_ORACLE_MAX_CELLS:
        raise OracleScopeError(
            f"exhaustive oracle supports at most {MAXINFO_ORACLE_MAX_CELLS} cells, "
            f"got {table.size}"
        )
    if (table < 0).any():
        raise HypothesisError("joint table entries must be nonnegative")
    if abs(float(table.sum()) - 1.0) > 1e-12:
        raise HypothesisError("joint table must sum to 1 within 1e-12")
    if beta_level < 0:
        raise HypothesisError("beta_level must be nonnegative")

    p = table.ravel()
    q = np.outer(table.sum(axis=1), table.sum(axis=0)).ravel()
    k = p.size
    best = -math.inf
    p_sum = 0.0
    q_sum = 0.0
    member = [False] * k
    for i in range(1, 1 << k):
        j = (i & -i).bit_length() - 1
        if member[j]:
            p_sum -= p[j]
            q_sum -= q[j]
            member[j] = False
        else:
            p_sum += p[j]
            q_sum += q[j]
            member[j] = True
        if p_sum > beta_level:
            if q_sum <= 0.0:
                return math.inf
            ratio = (p_sum - beta_level) / q_sum
            if ratio > best:
                best = ratio
    if best == -math.inf:
        return -math.inf
    return math.log(best)
