import json
import math

import numpy as np
import pytest

from demcoh.bounds import CoherenceParams, gamma_from_maxinfo
from demcoh.core import (
    Collection,
    Dataset,
    Lens,
    Predictor,
    Split,
    Subpopulation,
    empirical_distribution,
)
from demcoh.errors import HypothesisError, OddDatasetError, TrialExecutionError
from demcoh.experiment import (
    AuditConfig,
    audit_report,
    clopper_pearson,
    dem_coh_trial,
    eligible_subpopulations,
    estimate_beta,
)
from demcoh.mechanisms import clear_release, constant_learner, memorizing_learner
from demcoh.metric import wasserstein1

from conftest import (
    everyone_collection,
    fixed_learner,
    make_binary_dataset,
    make_distinct_dataset,
)


def config(ds, alpha=1.0, gamma=1, trials=10, seed=0, collection=None, lens=None):
    return AuditConfig(
        alpha=alpha,
        gamma=gamma,
        trials=trials,
        seed=seed,
        collection=collection or everyone_collection(),
        lens=lens or Lens.full(ds.schema),
    )


EXTREME_BIT = Predictor("extreme", lambda r: 1.0 if r.features[0] == "1" else -1.0)


class TestSingleTrial:
    def test_constant_predictor_is_always_coherent(self, rng):
        ds = make_distinct_dataset(20)
        outcome = dem_coh_trial(
            clear_release(), constant_learner(0.0), ds, config(ds), rng
        )
        assert outcome.bit == 1
        assert all(s.distance == 0.0 for s in outcome.subpopulations)

    def test_clear_release_plus_memorizing_witnesses_distance_two(self, rng):
        ds = make_distinct_dataset(200)
        cfg = config(ds, alpha=1.0, gamma=80)
        outcome = dem_coh_trial(clear_release(), memorizing_learner(), ds, cfg, rng)
        assert outcome.bit == 0
        assert outcome.subpopulations[0].distance == 2.0

    def test_odd_dataset_rejected(self, rng):
        ds = make_distinct_dataset(7)
        with pytest.raises(OddDatasetError):
            dem_coh_trial(clear_release(), constant_learner(0.0), ds, config(make_distinct_dataset(8)), rng)

    def test_split_concentration_keeps_fixed_predictors_coherent(self):
        # Balanced one-bit data: any fixed predictor's two half-views only
        # differ by the hypergeometric wobble of the split, tiny at n=1000.
        ds = make_binary_dataset(1000)
        cfg = config(ds, alpha=0.5, trials=1, seed=0)
        coherent = 0
        trials = 2000
        children = np.random.SeedSequence(99).spawn(trials)
        for i in range(trials):
            outcome = dem_coh_trial(
                clear_release(),
                fixed_learner(EXTREME_BIT),
                ds,
                cfg,
                np.random.default_rng(children[i]),
            )
            coherent += outcome.bit
        assert coherent / trials >= 0.99

    def test_empty_realized_intersection_is_skipped_and_flagged(self):
        # A single-member subpopulation always lands on one side only.
        ds = make_distinct_dataset(10)
        lone = Subpopulation("lone", lambda r: r.features[0] == "3")
        cfg = config(ds, gamma=1, collection=Collection((lone,)))
        outcome = dem_coh_trial(
            clear_release(), memorizing_learner(), ds, cfg, np.random.default_rng(0)
        )
        sub = outcome.subpopulations[0]
        assert sub.skipped
        assert sub.distance is None
        assert (sub.a_count, sub.b_count) in ((1, 0), (0, 1))
        assert outcome.bit == 1  # a skip is not an incoherence witness


class TestEligibility:
    def test_size_constraint_counts_the_full_dataset(self):
        # 100 members, gamma=100: eligible even though each half holds ~50.
        ds = make_distinct_dataset(200)
        first100 = Subpopulation("first100", lambda r: int(r.features[0]) < 100)
        cfg = config(ds, gamma=100, collection=Collection((first100,)))
        eligible = eligible_subpopulations(ds, cfg)
        assert [(s.name, c) for s, c in eligible] == [("first100", 100)]

    def test_below_gamma_is_not_audited(self):
        ds = make_distinct_dataset(200)
        small = Subpopulation("small", lambda r: int(r.features[0]) < 99)
        cfg = config(ds, gamma=100, collection=Collection((small,)))
        assert eligible_subpopulations(ds, cfg) == ()
        outcome = dem_coh_trial(
            clear_release(), memorizing_learner(), ds, cfg, np.random.default_rng(1)
        )
        assert outcome.bit == 1
        assert outcome.subpopulations == ()


class TestClopperPearson:
    def test_zero_successes(self):
        lo, hi = clopper_pearson(0, 1000)
        assert lo == 0.0
        assert hi == pytest.approx(1 - 0.025 ** (1 / 1000), rel=1e-9)

    def test_all_successes(self):
        lo, hi = clopper_pearson(1000, 1000)
        assert hi == 1.0
        assert lo == pytest.approx(0.025 ** (1 / 1000), rel=1e-9)

    def test_interval_contains_point_estimate(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            n = int(rng.integers(1, 500))
            k = int(rng.integers(0, n + 1))
            lo, hi = clopper_pearson(k, n)
            assert 0.0 <= lo <= k / n <= hi <= 1.0


class TestEstimateBeta:
    def test_constant_learner_estimates_zero(self):
        ds = make_distinct_dataset(20)
        est = estimate_beta(
            clear_release, lambda: constant_learner(0.0), ds, config(ds, trials=50)
        )
        assert est.estimate == 0.0
        assert est.ci_low == 0.0
        assert est.ci_high < 0.08

    def test_memorizing_estimates_one(self):
        ds = make_distinct_dataset(200)
        est = estimate_beta(
            clear_release, memorizing_learner, ds, config(ds, gamma=80, trials=50)
        )
        assert est.estimate == 1.0
        assert all(o.bit == 0 for o in est.outcomes)

    def test_monotone_in_alpha_with_shared_seeds(self):
        # Same seed means the same splits; raising the threshold can only
        # turn incoherence witnesses off.
        ds = make_binary_dataset(30)
        estimates = []
        for alpha in (0.05, 0.15, 0.3, 0.6, 1.2):
            est = estimate_beta(
                clear_release,
                lambda: fixed_learner(EXTREME_BIT),
                ds,
                config(ds, alpha=alpha, trials=200, seed=42),
            )
            estimates.append(est.estimate)
        assert all(a >= b for a, b in zip(estimates, estimates[1:]))
        assert estimates[0] > estimates[-1]  # small n actually wobbles

    def test_threads_do_not_change_results(self):
        ds = make_distinct_dataset(40)
        cfg = config(ds, trials=32, seed=5)
        est1 = estimate_beta(clear_release, memorizing_learner, ds, cfg, threads=1)
        est8 = estimate_beta(clear_release, memorizing_learner, ds, cfg, threads=8)
        assert est1.outcomes == est8.outcomes
        assert est1.estimate == est8.estimate

    def test_identical_seeds_identical_reports(self):
        ds = make_distinct_dataset(40)
        cfg = config(ds, trials=20, seed=9)
        r1 = audit_report(estimate_beta(clear_release, memorizing_learner, ds, cfg))
        r2 = audit_report(estimate_beta(clear_release, memorizing_learner, ds, cfg))
        assert json.dumps(r1.to_json_dict(), sort_keys=True) == json.dumps(
            r2.to_json_dict(), sort_keys=True
        )

    def test_fresh_instances_per_trial_and_partial_results_on_failure(self):
        ds = make_distinct_dataset(20)
        built = []

        def flaky_curator():
            built.append(len(built))
            if len(built) == 3:
                raise RuntimeError("third construction blows up")
            return clear_release()

        with pytest.raises(TrialExecutionError) as err:
            estimate_beta(
                flaky_curator, lambda: constant_learner(0.0), ds, config(ds, trials=10)
            )
        assert err.value.trial_index == 2
        assert len(err.value.partial) == 2
        assert isinstance(err.value.cause, RuntimeError)


class TestExchangeability:
    def test_swapping_halves_leaves_distances_invariant(self):
        # For a split-independent predictor the two halves play symmetric
        # roles: complementing the index set reproduces the same distance.
        ds = make_binary_dataset(40)
        lens = Lens.full(ds.schema)
        n = len(ds)
        for seed in range(50):
            rng = np.random.default_rng(seed)
            split = Split(ds, frozenset(int(i) for i in rng.permutation(n)[: n // 2]))
            flipped = Split(ds, frozenset(range(n)) - split.index_set_a)
            d1 = wasserstein1(
                empirical_distribution(EXTREME_BIT, split.side_a),
                empirical_distribution(EXTREME_BIT, split.side_b),
            )
            d2 = wasserstein1(
                empirical_distribution(EXTREME_BIT, flipped.side_a),
                empirical_distribution(EXTREME_BIT, flipped.side_b),
            )
            assert d1 == d2


class TestAuditReport:
    @staticmethod
    def bound_with(beta=0.16):
        # beta=0.16 keeps the required subgroup size at the floor of 80,
        # matching the audit's own size constraint below.
        result = gamma_from_maxinfo(
            0.0, CoherenceParams(alpha=1.0, beta=beta, collection_size=1)
        )
        assert result.gamma == 80.0
        return result

    def make_estimate(self, incoherent_count, trials=1000):
        ds = make_distinct_dataset(200)
        learner = memorizing_learner if incoherent_count else (lambda: constant_learner(0.0))
        est = estimate_beta(
            clear_release, learner, ds, config(ds, gamma=80, trials=trials)
        )
        return est

    def test_pass_verdict(self):
        est = self.make_estimate(0, trials=200)
        report = audit_report(est, self.bound_with())
        assert report.verdict == "pass"

    def test_fail_verdict(self):
        est = self.make_estimate(1, trials=200)
        report = audit_report(est, self.bound_with())
        assert report.verdict == "fail"

    def test_no_bound_is_inconclusive(self):
        est = self.make_estimate(0, trials=50)
        report = audit_report(est)
        assert report.verdict == "inconclusive"
        assert report.to_json_dict()["bound"] is None

    def test_bound_needing_larger_gamma_is_inconclusive(self):
        # The audit filtered at gamma=80 but the theorem needs more, so it
        # promises nothing about this run.
        est = self.make_estimate(1, trials=50)
        big = gamma_from_maxinfo(
            50.0, CoherenceParams(alpha=1.0, beta=0.1, collection_size=1)
        )
        assert big.gamma > 80
        report = audit_report(est, big)
        assert report.verdict == "inconclusive"

    def test_histograms_summarize_distances(self):
        est = self.make_estimate(1, trials=30)
        payload = audit_report(est).to_json_dict()
        hist = payload["subpopulation_histograms"][0]
        assert hist["name"] == "everyone"
        assert hist["audited"] == 30
        assert sum(hist["counts"]) == 30
        # every distance is exactly 2, the top bin
        assert hist["counts"][-1] == 30

    def test_config_validation(self):
        ds = make_distinct_dataset(4)
        with pytest.raises(HypothesisError):
            config(ds, alpha=0.0)
        with pytest.raises(HypothesisError):
            config(ds, alpha=2.5)
        with pytest.raises(HypothesisError):
            config(ds, gamma=0)
        with pytest.raises(HypothesisError):
            config(ds, trials=0)
