"""The randomized split-audit experiment.

One trial: filter the subpopulation collection by the size constraint on
the full dataset, split the dataset into uniform halves, train a
predictor on the curated first half, and flag incoherence when some
audited subpopulation shows a prediction-distribution distance above the
threshold.  Repeating over independent re-splits of the same dataset
estimates the incoherence probability, reported with an exact binomial
confidence interval.

Trials may run in parallel: each one owns a random stream derived
deterministically from (seed, trial index), and the harness constructs a
fresh curator and learner per trial, so results are identical for any
thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as _beta_dist

from .core import (
    Collection,
    Dataset,
    Lens,
    Subpopulation,
    empirical_distribution,
    random_split,
    restrict_lens,
    restrict_subpop,
)
from .errors import HypothesisError, OddDatasetError, TrialExecutionError
from .mechanisms import Curator, Learner
from .metric import wasserstein1

VERDICT_PASS = "pass"
VERDICT_FAIL = "fail"
VERDICT_INCONCLUSIVE = "inconclusive"

REPORT_FORMAT_VERSION = 1

#: Bin edges for the per-subpopulation distance histograms (range of the
#: metric on [-1, 1] supports).
HISTOGRAM_BIN_EDGES = tuple(round(0.05 * i, 2) for i in range(41))


@dataclass(frozen=True)
class AuditConfig:
    """Parameters of one audit: threshold, size constraint, trial budget,
    seed, and what to audit (collection and lens)."""

    alpha: float
    gamma: float
    trials: int
    seed: int
    collection: Collection
    lens: Lens

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise HypothesisError(f"alpha must be in (0, 2], got {self.alpha}")
        if self.gamma < 1:
            raise HypothesisError(f"gamma must be >= 1, got {self.gamma}")
        if self.trials < 1:
            raise HypothesisError(f"trials must be >= 1, got {self.trials}")
        if not -(2**63) <= int(self.seed) < 2**64:
            raise HypothesisError(f"seed must fit in 64 bits, got {self.seed}")


@dataclass(frozen=True)
class SubpopulationOutcome:
    """Per-subpopulation measurement within one trial."""

    name: str
    total_count: int
    a_count: int
    b_count: int
    distance: float | None
    skipped: bool

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "total_count": self.total_count,
            "a_count": self.a_count,
            "b_count": self.b_count,
            "distance": self.distance,
            "skipped": self.skipped,
        }


@dataclass(frozen=True)
class TrialOutcome:
    """One trial's bit (0 = incoherence witnessed) and evidence."""

    trial_index: int
    bit: int
    subpopulations: tuple[SubpopulationOutcome, ...]
    stream_key: tuple[int, int]

    def to_json_dict(self) -> dict:
        return {
            "trial": self.trial_index,
            "bit": self.bit,
            "stream_key": list(self.stream_key),
            "subpopulations": [s.to_json_dict() for s in self.subpopulations],
        }


@dataclass(frozen=True)
class BetaEstimate:
    """Monte Carlo incoherence estimate with an exact 95% interval."""

    trials: int
    incoherent: int
    estimate: float
    ci_low: float
    ci_high: float
    outcomes: tuple[TrialOutcome, ...]
    config: AuditConfig

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "incoherent": self.incoherent,
            "beta_hat": self.estimate,
            "ci95": [self.ci_low, self.ci_high],
        }


def clopper_pearson(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact two-sided binomial interval; well-behaved at k = 0 and k = n,
    where normal approximations fall apart."""
    if not 0 <= k <= n or n < 1:
        raise HypothesisError(f"need 0 <= k <= n with n >= 1, got k={k}, n={n}")
    tail = (1.0 - confidence) / 2.0
    lo = 0.0 if k == 0 else float(_beta_dist.ppf(tail, k, n - k + 1))
    hi = 1.0 if k == n else float(_beta_dist.ppf(1.0 - tail, k + 1, n - k))
    return lo, hi


def eligible_subpopulations(
    dataset: Dataset, config: AuditConfig
) -> tuple[tuple[Subpopulation, int], ...]:
    """Subpopulations meeting the size constraint, with their counts.

    Counted on the full dataset, never the halves: eligibility is a
    property of the audit, not of one split.
    """
    out = []
    for sub in config.collection:
        count = sum(1 for r in dataset.records if sub.predicate(r))
        if count >= config.gamma:
            out.append((sub, count))
    return tuple(out)


def dem_coh_trial(
    curator: Curator,
    learner: Learner,
    dataset: Dataset,
    config: AuditConfig,
    rng: np.random.Generator,
    trial_index: int = 0,
    eligible: tuple[tuple[Subpopulation, int], ...] | None = None,
) -> TrialOutcome:
    """One audit pass over a fresh random half-split.

    A subpopulation whose realized intersection with either half is empty
    is skipped and flagged rather than counted incoherent: the distance is
    undefined on empty support, and at theorem-scale size constraints the
    event is negligible.  Flagging keeps it auditable.
    """
    n = len(dataset)
    if n < 2 or n % 2:
        raise OddDatasetError(f"the audit needs an even dataset size, got {n}")
    if eligible is None:
        eligible = eligible_subpopulations(dataset, config)
    split = random_split(dataset, rng)
    side_a, side_b = split.side_a, split.side_b
    report = curator.run(side_a, rng)
    predictor = learner.run(report, rng)

    outcomes = []
    incoherent = False
    for sub, total in eligible:
        in_a = restrict_subpop(side_a, sub)
        in_b = restrict_subpop(side_b, sub)
        if len(in_a) == 0 or len(in_b) == 0:
            outcomes.append(
                SubpopulationOutcome(sub.name, total, len(in_a), len(in_b), None, True)
            )
            continue
        dist = wasserstein1(
            empirical_distribution(predictor, restrict_lens(in_a, config.lens)),
            empirical_distribution(predictor, restrict_lens(in_b, config.lens)),
        )
        if dist > config.alpha:
            incoherent = True
        outcomes.append(
            SubpopulationOutcome(sub.name, total, len(in_a), len(in_b), dist, False)
        )
    return TrialOutcome(
        trial_index=trial_index,
        bit=0 if incoherent else 1,
        subpopulations=tuple(outcomes),
        stream_key=(int(config.seed), trial_index),
    )


def estimate_beta(
    make_curator,
    make_learner,
    dataset: Dataset,
    config: AuditConfig,
    threads: int = 1,
) -> BetaEstimate:
    """Run config.trials independent re-splits of the same dataset.

    ``make_curator`` and ``make_learner`` are zero-argument factories; a
    fresh instance is constructed per trial, which is what lets trials run
    concurrently without any shared mutable state.  A failing trial aborts
    the estimate with the completed prefix attached.
    """
    eligible = eligible_subpopulations(dataset, config)
    children = np.random.SeedSequence(config.seed).spawn(config.trials)

    def run_one(i: int) -> TrialOutcome:
        rng = np.random.default_rng(children[i])
        return dem_coh_trial(
            make_curator(), make_learner(), dataset, config, rng, i, eligible
        )

    results: list = [None] * config.trials
    if threads <= 1:
        for i in range(config.trials):
            try:
                results[i] = run_one(i)
            except Exception as exc:
                raise TrialExecutionError(
                    i, exc, tuple(r for r in results[:i])
                ) from exc
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_one, i) for i in range(config.trials)]
        for i, fut in enumerate(futures):
            exc = fut.exception()
            if exc is not None:
                raise TrialExecutionError(
                    i, exc, tuple(r for r in results[:i] if r is not None)
                ) from exc
            results[i] = fut.result()

    k = sum(1 for r in results if r.bit == 0)
    lo, hi = clopper_pearson(k, config.trials)
    return BetaEstimate(
        trials=config.trials,
        incoherent=k,
        estimate=k / config.trials,
        ci_low=lo,
        ci_high=hi,
        outcomes=tuple(results),
        config=config,
    )


@dataclass(frozen=True)
class AuditReport:
    """The joined empirical and theoretical picture of one audit."""

    estimate: BetaEstimate
    bound: object | None
    verdict: str
    config_echo: dict

    def to_json_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "config": dict(self.config_echo),
            "estimate": self.estimate.to_json_dict(),
            "trials": [t.to_json_dict() for t in self.estimate.outcomes],
            "subpopulation_histograms": _distance_histograms(self.estimate),
            "bound": self.bound.to_json_dict() if self.bound is not None else None,
            "verdict": self.verdict,
        }


def _distance_histograms(estimate: BetaEstimate) -> list[dict]:
    per_name: dict[str, list[float]] = {}
    skipped: dict[str, int] = {}
    for trial in estimate.outcomes:
        for sub in trial.subpopulations:
            per_name.setdefault(sub.name, [])
            skipped.setdefault(sub.name, 0)
            if sub.skipped:
                skipped[sub.name] += 1
            else:
                per_name[sub.name].append(sub.distance)
    edges = np.asarray(HISTOGRAM_BIN_EDGES)
    out = []
    for name in per_name:
        counts, _ = np.histogram(per_name[name], bins=edges)
        out.append(
            {
                "name": name,
                "bin_edges": list(HISTOGRAM_BIN_EDGES),
                "counts": [int(c) for c in counts],
                "audited": len(per_name[name]),
                "skipped": skipped[name],
            }
        )
    return out


def audit_report(
    estimate: BetaEstimate,
    bound=None,
    config_echo: dict | None = None,
) -> AuditReport:
    """Attach a verdict to an estimate, against an optional theoretical
    bound.

    fail: the interval's lower end exceeds the theoretical incoherence
    budget while the audited size constraint satisfies the bound's
    required subgroup size (so the theorem actually applies).
    pass: an applicable bound is not contradicted.
    inconclusive: no bound, or the bound's size requirement exceeds the
    audited size constraint.
    """
    if bound is None:
        verdict = VERDICT_INCONCLUSIVE
    else:
        applicable = estimate.config.gamma >= bound.gamma - 1e-9
        if not applicable:
            verdict = VERDICT_INCONCLUSIVE
        elif estimate.ci_low > bound.inputs["beta"]:
            verdict = VERDICT_FAIL
        else:
            verdict = VERDICT_PASS
    if config_echo is None:
        config_echo = {
            "alpha": estimate.config.alpha,
            "gamma": estimate.config.gamma,
            "trials": estimate.config.trials,
            "seed": estimate.config.seed,
            "lens": sorted(estimate.config.lens.features),
            "subpopulations": [s.name for s in estimate.config.collection],
        }
    return AuditReport(
        estimate=estimate, bound=bound, verdict=verdict, config_echo=config_echo
    )
