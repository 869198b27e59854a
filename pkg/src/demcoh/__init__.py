"""Demographic-coherence privacy auditing.

Run the randomized split-audit experiment against a data-release
pipeline, measure per-subpopulation prediction-distribution distances,
and compare the empirical incoherence rate with the closed-form
guarantees that differential-privacy or max-information budgets provide.
"""

from .bounds import (
    BoundResult,
    CoherenceParams,
    MaxInfoBudget,
    exact_max_information,
    gamma_approx_dp,
    gamma_from_maxinfo,
    gamma_pure_dp,
    max_epsilon_for,
    maxinfo_approx_dp,
    maxinfo_approx_dp_general,
    maxinfo_pure_dp,
)
from .concentration import (
    AzumaBound,
    HypergeomParams,
    IncoherenceBound,
    azuma_tail,
    fixed_predictor_gap_bound,
    fixed_predictor_min_group_size,
    hypergeom_exact,
    hypergeom_tail_bound,
    mcdiarmid_half_split,
    mcdiarmid_without_replacement,
)
from .core import (
    NULL,
    Collection,
    Dataset,
    EmpiricalDistribution,
    Lens,
    Predictor,
    Record,
    Split,
    Subpopulation,
    empirical_distribution,
    random_split,
    restrict_lens,
    restrict_subpop,
)
from .experiment import (
    AuditConfig,
    AuditReport,
    BetaEstimate,
    SubpopulationOutcome,
    TrialOutcome,
    audit_report,
    clopper_pearson,
    dem_coh_trial,
    estimate_beta,
)
from .mechanisms import (
    Curator,
    Learner,
    Report,
    clear_release,
    constant_learner,
    histogram_threshold_learner,
    laplace_histogram,
    memorizing_learner,
    randomized_response,
    subsample_release,
)
from .metric import wasserstein1, wasserstein1_lp_oracle, wasserstein1_sorted_coupling

__version__ = "0.1.0"
