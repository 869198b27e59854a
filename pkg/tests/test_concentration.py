import math

import numpy as np
import pytest

from demcoh.concentration import (
    HypergeomParams,
    azuma_tail,
    fixed_predictor_gap_bound,
    fixed_predictor_min_group_size,
    hypergeom_exact,
    hypergeom_tail_bound,
    mcdiarmid_half_split,
    mcdiarmid_without_replacement,
)
from demcoh.errors import HypothesisError, OracleScopeError


class TestHypergeomTailBound:
    def test_golden_value(self):
        # c = max{1/6 + 1/6, 1/6 + 1/6} = 1/3; exponent -2*(1/3)*(4-1) = -2.
        bound = hypergeom_tail_bound(HypergeomParams(10, 5, 5), 2.0)
        assert bound == pytest.approx(math.exp(-2.0), abs=1e-12)

    def test_exact_tail_is_below_bound_at_golden_point(self):
        table = hypergeom_exact(HypergeomParams(10, 5, 5))
        # Pr[K > 2.5 + 2] = Pr[K = 5] = C(5,5)C(5,0)/C(10,5) = 1/252.
        assert table.prob_above(2.5 + 2.0) == pytest.approx(1 / 252, abs=1e-12)
        assert table.prob_above(4.5) <= hypergeom_tail_bound(HypergeomParams(10, 5, 5), 2.0)

    def test_small_deviation_rejected(self):
        with pytest.raises(HypothesisError):
            hypergeom_tail_bound(HypergeomParams(10, 5, 5), 1.0)

    def test_strictly_below_one_at_dev_two(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            b = int(rng.integers(2, 200))
            a = int(rng.integers(1, b + 1))
            s = int(rng.integers(1, b + 1))
            assert hypergeom_tail_bound(HypergeomParams(b, a, s), 2.0) < 1.0

    def test_monotone_in_deviation(self):
        p = HypergeomParams(50, 20, 25)
        devs = [2.0, 2.5, 3.0, 4.0, 6.0]
        vals = [hypergeom_tail_bound(p, d) for d in devs]
        assert all(x > y for x, y in zip(vals, vals[1:]))


class TestHypergeomExact:
    def test_two_point_symmetry(self):
        table = hypergeom_exact(HypergeomParams(2, 1, 1))
        assert table.pmf_at(0) == pytest.approx(0.5)
        assert table.pmf_at(1) == pytest.approx(0.5)

    def test_golden_pmf(self):
        table = hypergeom_exact(HypergeomParams(10, 5, 5))
        assert table.pmf_at(5) == pytest.approx(1 / 252, abs=1e-15)

    def test_normalization_and_mean_on_grid(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            b = int(rng.integers(1, 300))
            a = int(rng.integers(1, b + 1))
            s = int(rng.integers(1, b + 1))
            table = hypergeom_exact(HypergeomParams(b, a, s))
            assert math.fsum(table.pmf.tolist()) == pytest.approx(1.0, abs=1e-10)
            assert table.mean() == pytest.approx(s * a / b, rel=1e-9)

    def test_large_population_stays_stable(self):
        table = hypergeom_exact(HypergeomParams(5000, 2500, 2500))
        assert math.fsum(table.pmf.tolist()) == pytest.approx(1.0, abs=1e-10)

    def test_population_cap(self):
        with pytest.raises(OracleScopeError):
            hypergeom_exact(HypergeomParams(5001, 10, 10))

    def test_parameter_validation(self):
        with pytest.raises(HypothesisError):
            HypergeomParams(10, 0, 5)
        with pytest.raises(HypothesisError):
            HypergeomParams(10, 5, 11)


class TestMcDiarmid:
    def test_zero_deviation_gives_one(self):
        assert mcdiarmid_without_replacement(10, 5, 1.0, 0.0) == 1.0

    def test_half_split_golden_value(self):
        # exp(-4 * 25 / (100 * 1)) = e^{-1}.
        assert mcdiarmid_half_split(100, 1.0, 5.0) == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_general_dominated_by_specialization_on_half_line(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            n = 2 * int(rng.integers(2, 500))
            t = float(rng.uniform(0, 10))
            delta = float(rng.uniform(0.1, 3))
            general = mcdiarmid_without_replacement(n, n // 2, delta, t)
            special = mcdiarmid_half_split(n, delta, t)
            assert general <= special + 1e-15

    def test_monotone_in_t_and_sensitivity(self):
        for t1, t2 in [(0.5, 1.0), (1.0, 3.0)]:
            assert mcdiarmid_without_replacement(100, 30, 1.0, t2) <= \
                mcdiarmid_without_replacement(100, 30, 1.0, t1)
        assert mcdiarmid_without_replacement(100, 30, 2.0, 1.0) >= \
            mcdiarmid_without_replacement(100, 30, 1.0, 1.0)

    def test_domain_errors(self):
        with pytest.raises(HypothesisError):
            mcdiarmid_without_replacement(10, 10, 1.0, 1.0)
        with pytest.raises(HypothesisError):
            mcdiarmid_without_replacement(10, 5, 0.0, 1.0)


class TestAzuma:
    def test_zero_t(self):
        result = azuma_tail(25, 1.0, 0.5, 0.0)
        assert result.probability == 1.0
        assert result.threshold == 12.5

    def test_golden_value(self):
        assert azuma_tail(10, 1.0, 0.0, 3.0).probability == pytest.approx(
            math.exp(-4.5), abs=1e-12
        )

    def test_threshold_grows_like_sqrt_n(self):
        t = 2.0
        for n in (4, 16, 64):
            assert azuma_tail(n, 1.0, 0.0, t).threshold == pytest.approx(t * math.sqrt(n))


class TestFixedPredictorGapBound:
    def test_vacuous_bound_clamps_to_one(self):
        result = fixed_predictor_gap_bound(100, 1.0, 0.5)
        assert result.probability == 1.0
        assert result.vacuous

    def test_hypothesis_boundary(self):
        # mu solving 4.15 * ln(4/mu) / alpha^2 = m exactly.
        m, alpha = 500, 0.3
        mu = 4.0 * math.exp(-alpha * alpha * m / 4.15)
        terms = fixed_predictor_min_group_size(alpha, mu)
        assert terms["alpha_sq"] == pytest.approx(m, rel=1e-12)
        assert max(terms.values()) == pytest.approx(m, rel=1e-12)
        result = fixed_predictor_gap_bound(m, alpha, mu)
        assert result.probability == pytest.approx(2 * 501 * mu)
        assert not result.vacuous

    def test_too_small_group_names_failing_term(self):
        with pytest.raises(HypothesisError, match="floor"):
            fixed_predictor_gap_bound(39, 1.0, 0.9)
        with pytest.raises(HypothesisError, match="alpha_sq"):
            fixed_predictor_gap_bound(100, 0.1, 1e-6)


class TestBoundValiditySweep:
    def test_exact_tails_never_exceed_bound_small_sweep(self):
        # Narrower than the acceptance sweep; fast enough to run always.
        for b in range(2, 25):
            for a in range(1, b + 1):
                for s in range(1, b + 1):
                    params = HypergeomParams(b, a, s)
                    table = hypergeom_exact(params)
                    mean = params.mean
                    for dev in (2.0, 3.0):
                        bound = hypergeom_tail_bound(params, dev)
                        assert table.prob_above(mean + dev) <= bound + 1e-12
                        assert table.prob_below(mean - dev) <= bound + 1e-12
