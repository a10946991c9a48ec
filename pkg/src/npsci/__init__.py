"""Confidence intervals for the Net Promoter Score and their coverage evaluation."""

from npsci.core import (
    ConfidenceLevel,
    IntervalEstimate,
    InvalidInputError,
    Tpmd,
    TrinomialCounts,
    nps_from_counts,
    nps_from_tpmd,
    nps_variance,
    possible_scores,
    tpmd_from_counts,
)
from npsci.methods import (
    DEFAULT_METHODS,
    MethodSpec,
    SolverError,
    adjusted_wald_interval,
    compute_interval,
    goodman_interval,
    iterative_score_interval,
    may_johnson_interval,
    score_shrunk_interval,
    wald_interval,
)

__version__ = "0.1.0"
