"""Ewens-measure combinatorial CLT toolkit.

Sampling and exact computation for the Ewens measure on permutations,
Stein exchangeable pairs and approximate zero-bias couplings for the
statistic Y = sum_i a_{i, pi(i)}, explicit Berry-Esseen bound constants,
exact small-n enumeration oracles, and normal-distance estimation.
"""

from .bounds import (
    BoundReport,
    alpha1,
    alpha2,
    bound_report,
    generic_zero_bias_bounds,
    integer_lower_bound,
    kappa1,
    kappa2,
)
from .coupling import (
    CouplingSample,
    SquareBiasConfig,
    SquareBiasSampler,
    SteinPairSample,
    construct_dagger,
    constructive_square_bias_law,
    index_square_bias_weights,
    make_stein_pair,
    sample_approx_zero_bias,
    sample_prepost,
    sample_zero_bias_batch,
)
from .distances import (
    DistanceEstimate,
    kolmogorov_empirical,
    kolmogorov_exact,
    normal_cdf,
    wasserstein_empirical,
    wasserstein_exact,
)
from .ewens import (
    C1Moments,
    EwensParams,
    c1_moments,
    conditional_remaining_prob,
    constrained_prob,
    cycle_count_factorial_moment,
    cycle_type_pmf,
    ewens_log_pmf,
    ewens_pmf,
    falling_factorial,
    rising_factorial,
    sample_crp,
    sample_crp_images,
)
from .oracle import (
    DiscreteLaw,
    enumerate_permutations,
    exact_expectation,
    exact_square_bias_law,
    exact_statistic_law,
)
from .permutations import (
    CycleType,
    Permutation,
    cycle_type,
    mapping_cycle_count,
    reduce_delete,
    restrict_cycles,
)
from .statistic import (
    Remainder,
    ScoreMatrix,
    VarianceDecomposition,
    b_value,
    center,
    classify,
    exact_remainder,
    grand_mean,
    iter_case_configs,
    remainder_bounds,
    statistic,
    t_statistic,
    variance_decomposition,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "C1Moments",
    "CouplingSample",
    "CycleType",
    "DiscreteLaw",
    "DistanceEstimate",
    "EwensParams",
    "Permutation",
    "Remainder",
    "ScoreMatrix",
    "SquareBiasConfig",
    "SquareBiasSampler",
    "SteinPairSample",
    "VarianceDecomposition",
    "alpha1",
    "alpha2",
    "b_value",
    "bound_report",
    "c1_moments",
    "center",
    "classify",
    "conditional_remaining_prob",
    "constrained_prob",
    "construct_dagger",
    "constructive_square_bias_law",
    "cycle_count_factorial_moment",
    "cycle_type",
    "cycle_type_pmf",
    "enumerate_permutations",
    "ewens_log_pmf",
    "ewens_pmf",
    "exact_expectation",
    "exact_remainder",
    "exact_square_bias_law",
    "exact_statistic_law",
    "falling_factorial",
    "generic_zero_bias_bounds",
    "grand_mean",
    "index_square_bias_weights",
    "integer_lower_bound",
    "iter_case_configs",
    "kappa1",
    "kappa2",
    "kolmogorov_empirical",
    "kolmogorov_exact",
    "make_stein_pair",
    "mapping_cycle_count",
    "normal_cdf",
    "reduce_delete",
    "remainder_bounds",
    "restrict_cycles",
    "rising_factorial",
    "sample_approx_zero_bias",
    "sample_crp",
    "sample_crp_images",
    "sample_prepost",
    "sample_zero_bias_batch",
    "statistic",
    "t_statistic",
    "variance_decomposition",
    "wasserstein_empirical",
    "wasserstein_exact",
]
