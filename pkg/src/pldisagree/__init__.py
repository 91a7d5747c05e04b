"""Position-bias robust ranking metrics for logs of a Plackett-Luce recommendation policy."""
from .estimators import ConditionalRankTransformer, DisagreementEstimator
from .metrics import (
    Rejected,
    cd_exact_contribution,
    cd_sample,
    estimate_metric,
    pd_sample,
    rank_distribution,
)
from .plackett_luce import (
    RankDistribution,
    ScoredCandidateSet,
    banner_log_prob,
    brute_force_rank_probs,
    conditional_rank_probs,
    sample_banner,
    sample_rank_product,
)
from .records import BannerRecord, MetricEstimate, ScoringModel

__version__ = "0.1.0"

__all__ = [
    "BannerRecord",
    "ConditionalRankTransformer",
    "DisagreementEstimator",
    "MetricEstimate",
    "RankDistribution",
    "Rejected",
    "ScoredCandidateSet",
    "ScoringModel",
    "banner_log_prob",
    "brute_force_rank_probs",
    "cd_exact_contribution",
    "cd_sample",
    "conditional_rank_probs",
    "estimate_metric",
    "pd_sample",
    "rank_distribution",
    "sample_banner",
    "sample_rank_product",
]
